#include "ordsurf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace ordsurf {

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32_block(std::ostream& os, const float* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t u;
    std::memcpy(&u, &p[i], 4);
    put_u32(os, u);
  }
}

struct Reader {
  std::ifstream in;
  std::string path;

  unsigned char byte() {
    char c;
    if (!in.get(c)) fail("truncated");
    return static_cast<unsigned char>(c);
  }
  std::uint16_t u16() {
    const std::uint32_t a = byte(), b = byte();
    return std::uint16_t(a | (b << 8));
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(byte()) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(byte()) << (8 * i);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  void f32_block(float* p, std::size_t n) {
    std::vector<unsigned char> buf(n * 4);
    if (!in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()))) {
      fail("truncated tensor payload");
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = std::uint32_t(buf[4 * i]) | (std::uint32_t(buf[4 * i + 1]) << 8) |
                        (std::uint32_t(buf[4 * i + 2]) << 16) |
                        (std::uint32_t(buf[4 * i + 3]) << 24);
      std::memcpy(&p[i], &u, 4);
    }
  }
  [[noreturn]] void fail(const std::string& why) {
    throw std::runtime_error("checkpoint: " + why + " in " + path);
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write("ORDN", 4);
  put_u32(out, 1);

  const NetConfig& c = ckpt.config;
  put_u32(out, std::uint32_t(c.stem_channels));
  for (int v : c.stage_channels) put_u32(out, std::uint32_t(v));
  for (int v : c.blocks_per_stage) put_u32(out, std::uint32_t(v));
  for (int v : c.aspp_rates) put_u32(out, std::uint32_t(v));
  put_u32(out, std::uint32_t(c.aspp_channels));
  put_u32(out, std::uint32_t(c.K));
  out.put(char(static_cast<std::uint8_t>(c.head)));
  put_u32(out, std::uint32_t(c.patch_size));

  out.put(char(static_cast<std::uint8_t>(ckpt.scheme.kind)));
  put_f64(out, ckpt.scheme.a);
  put_f64(out, ckpt.scheme.b);
  put_u32(out, std::uint32_t(ckpt.scheme.K));

  put_u32(out, std::uint32_t(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.size() > 0xffff) throw std::runtime_error("checkpoint: tensor name too long");
    put_u16(out, std::uint16_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    out.put(char(static_cast<std::uint8_t>(t.shape.size())));
    for (int d : t.shape) put_u32(out, std::uint32_t(d));
    put_f32_block(out, t.data.data(), t.data.size());
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r;
  r.path = path;
  r.in.open(path, std::ios::binary);
  if (!r.in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  if (!r.in.read(magic, 4) || std::memcmp(magic, "ORDN", 4) != 0) r.fail("bad magic");
  const std::uint32_t version = r.u32();
  if (version != 1) r.fail("unsupported version " + std::to_string(version));

  Checkpoint ckpt;
  NetConfig& c = ckpt.config;
  c.stem_channels = int(r.u32());
  for (int& v : c.stage_channels) v = int(r.u32());
  for (int& v : c.blocks_per_stage) v = int(r.u32());
  for (int& v : c.aspp_rates) v = int(r.u32());
  c.aspp_channels = int(r.u32());
  c.K = int(r.u32());
  const unsigned char head = r.byte();
  if (head > 2) r.fail("bad head kind");
  c.head = HeadKind(head);
  c.patch_size = int(r.u32());

  const unsigned char kind = r.byte();
  if (kind > 1) r.fail("bad scheme kind");
  const double a = r.f64();
  const double b = r.f64();
  const int K = int(r.u32());
  ckpt.scheme = make_scheme(SchemeKind(kind), a, b, K);

  const std::uint32_t count = r.u32();
  ckpt.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    std::string name(len, '\0');
    if (!r.in.read(name.data(), len)) r.fail("truncated tensor name");
    const unsigned char rank = r.byte();
    Tensor t;
    t.shape.resize(rank);
    std::int64_t n = rank == 0 ? 0 : 1;
    for (int d = 0; d < int(rank); ++d) {
      t.shape[std::size_t(d)] = int(r.u32());
      n *= t.shape[std::size_t(d)];
    }
    if (n < 0 || n > (std::int64_t(1) << 31)) r.fail("tensor too large");
    t.data.resize(std::size_t(n));
    r.f32_block(t.data.data(), t.data.size());
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

Checkpoint checkpoint_from_net(const Net& net, const DiscretizationScheme& scheme) {
  Checkpoint ckpt;
  ckpt.config = net.config();
  ckpt.scheme = scheme;
  for (const auto& p : net.parameters()) ckpt.tensors.emplace_back(p.name, p.node->value);
  return ckpt;
}

void load_into_net(const Checkpoint& ckpt, Net& net) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) {
    if (!by_name.emplace(name, &t).second) {
      throw std::runtime_error("checkpoint: duplicate tensor " + name);
    }
  }
  std::set<std::string> param_names;
  for (const auto& p : net.parameters()) {
    param_names.insert(p.name);
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: missing parameter " + p.name);
    if (it->second->shape != p.node->value.shape) {
      throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
    }
    p.node->value = *it->second;
  }
  for (const auto& [name, t] : ckpt.tensors) {
    (void)t;
    if (name.rfind("adam.", 0) == 0) continue;
    if (param_names.count(name) == 0) {
      throw std::runtime_error("checkpoint: unknown tensor " + name);
    }
  }
}

}  // namespace ordsurf
