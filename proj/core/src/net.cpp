#include "ordsurf/net.hpp"

#include <algorithm>
#include <cctype>

namespace ordsurf {

int head_out_channels(const NetConfig& cfg) {
  switch (cfg.head) {
    case HeadKind::Ordinal2K:
      return 2 * cfg.K;
    case HeadKind::MccK:
      return cfg.K;
    case HeadKind::Mse1:
      return 1;
  }
  throw std::runtime_error("net: unknown head kind");
}

std::vector<std::string> validate(const NetConfig& cfg) {
  if (cfg.stem_channels < 1) throw std::runtime_error("net config: stem_channels must be >= 1");
  for (int c : cfg.stage_channels) {
    if (c < 1) throw std::runtime_error("net config: stage channels must be >= 1");
  }
  for (int b : cfg.blocks_per_stage) {
    if (b < 1) throw std::runtime_error("net config: blocks_per_stage must be >= 1");
  }
  if (cfg.aspp_channels < 1) throw std::runtime_error("net config: aspp_channels must be >= 1");
  if (cfg.K < 1) throw std::runtime_error("net config: K must be >= 1");
  if (cfg.patch_size < 8 || cfg.patch_size % 8 != 0) {
    throw std::runtime_error("net config: patch_size must be a positive multiple of 8");
  }
  if (cfg.aspp_rates[0] < 1 || cfg.aspp_rates[0] >= cfg.aspp_rates[1] ||
      cfg.aspp_rates[1] >= cfg.aspp_rates[2]) {
    throw std::runtime_error("net config: aspp_rates must be strictly increasing and >= 1");
  }

  std::vector<std::string> warnings;
  const int feat = cfg.patch_size / 8;
  for (int r : cfg.aspp_rates) {
    if (2 * r >= feat) {
      warnings.push_back("aspp rate " + std::to_string(r) + ": dilated 3x3 kernel spans " +
                         std::to_string(2 * r + 1) + " px but the 1/8-scale feature map is only " +
                         std::to_string(feat) + " px wide");
    }
  }
  return warnings;
}

const char* head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::Ordinal2K:
      return "ordinal";
    case HeadKind::MccK:
      return "mcc";
    case HeadKind::Mse1:
      return "mse";
  }
  return "?";
}

HeadKind parse_head_kind(const std::string& s) {
  std::string t;
  for (char c : s) t.push_back(char(std::tolower(static_cast<unsigned char>(c))));
  if (t == "ordinal" || t == "ordinal_2k") return HeadKind::Ordinal2K;
  if (t == "mcc" || t == "mcc_k") return HeadKind::MccK;
  if (t == "mse" || t == "mse_1") return HeadKind::Mse1;
  throw std::runtime_error("net: unknown head kind '" + s + "' (expected ordinal|mcc|mse)");
}

}  // namespace ordsurf
