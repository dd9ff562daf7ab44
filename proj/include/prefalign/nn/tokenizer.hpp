#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace prefalign::nn {

/// Byte-level tokenizer: ids 0..255 are raw bytes, followed by four specials.
class ByteTokenizer {
 public:
  static constexpr int kBos = 256;
  static constexpr int kEos = 257;
  static constexpr int kPad = 258;
  static constexpr int kSep = 259;
  static constexpr int kVocabSize = 260;

  std::vector<int> encode(std::string_view text) const;
  /// Inverse of encode. Special tokens are dropped.
  std::string decode(const std::vector<int>& ids) const;

  /// BOS + prompt bytes + SEP: the conditioning prefix for a response.
  std::vector<int> encode_prompt(std::string_view prompt) const;
  /// Response bytes followed by EOS.
  std::vector<int> encode_response(std::string_view response) const;

  static bool is_special(int id) noexcept { return id >= 256; }
};

}  // namespace prefalign::nn
