#pragma once

#include "amd/common.hpp"

#include <string>
#include <vector>

namespace amd {

// Byte-level vocabulary: raw bytes 0..255, then specials, then a contiguous
// block of 1000 location tokens.
namespace vocab {

constexpr int kBytes = 256;
constexpr int kBos = 256;
constexpr int kEos = 257;
constexpr int kPad = 258;
constexpr int kSep = 259;
constexpr int kLoc0 = 260;
constexpr int kNumLoc = 1000;
constexpr int kSize = kLoc0 + kNumLoc;  // 1260

inline bool is_loc(int id) { return id >= kLoc0 && id < kLoc0 + kNumLoc; }

inline int loc_token(int bin) {
  if (bin < 0 || bin >= kNumLoc) throw ContractError("loc_token: bin outside [0,999]");
  return kLoc0 + bin;
}

inline int loc_bin(int id) {
  if (!is_loc(id)) throw ContractError("loc_bin: not a location token");
  return id - kLoc0;
}

// Text bytes to token ids (no BOS/EOS added).
std::vector<int> encode_text(const std::string& text);

// Token ids back to a string; location tokens render as "<loc_N>", specials
// as "<bos>", "<eos>", "<pad>", "<sep>".
std::string decode_tokens(const std::vector<int>& ids);

}  // namespace vocab
}  // namespace amd
