#include "prefalign/nn/tokenizer.hpp"

namespace prefalign::nn {

std::vector<int> ByteTokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(c);
  return ids;
}

std::string ByteTokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id >= 0 && id < 256) out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
  }
  return out;
}

std::vector<int> ByteTokenizer::encode_prompt(std::string_view prompt) const {
  std::vector<int> ids;
  ids.reserve(prompt.size() + 2);
  ids.push_back(kBos);
  for (unsigned char c : prompt) ids.push_back(c);
  ids.push_back(kSep);
  return ids;
}

std::vector<int> ByteTokenizer::encode_response(std::string_view response) const {
  std::vector<int> ids = encode(response);
  ids.push_back(kEos);
  return ids;
}

}  // namespace prefalign::nn
