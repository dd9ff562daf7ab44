#include "prefalign/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "prefalign/common/error.hpp"
#include "prefalign/nn/params.hpp"

namespace prefalign::nn {

namespace {

constexpr char kMagic[] = "PALN1";
constexpr std::size_t kMagicLen = 5;

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class U>
U get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw Error("checkpoint: truncated file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(U);
  return v;
}

}  // namespace

std::string encode_checkpoint(const std::string& kind, const nlohmann::json& config, const std::vector<double>& values) {
  nlohmann::json header = {{"kind", kind}, {"config", config}, {"param_count", values.size()}};
  const std::string hdr = header.dump();
  std::string out(kMagic, kMagicLen);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(hdr.size()));
  out += hdr;
  put_le<std::uint64_t>(out, values.size());
  out.reserve(out.size() + values.size() * 8);
  for (double v : values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < kMagicLen || bytes.compare(0, kMagicLen, kMagic) != 0) throw Error("checkpoint: bad magic");
  std::size_t pos = kMagicLen;
  const auto hlen = get_le<std::uint32_t>(bytes, pos);
  if (pos + hlen > bytes.size()) throw Error("checkpoint: truncated header");
  const auto header = nlohmann::json::parse(bytes.substr(pos, hlen));
  pos += hlen;
  const auto count = get_le<std::uint64_t>(bytes, pos);
  if (header.value("param_count", std::uint64_t{0}) != count) throw Error("checkpoint: parameter count mismatch");
  if (bytes.size() - pos != count * 8) throw Error("checkpoint: payload size mismatch");
  Checkpoint ck;
  ck.kind = header.at("kind").get<std::string>();
  ck.config = header.at("config");
  ck.values.resize(count);
  for (auto& v : ck.values) v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const std::string& kind, const nlohmann::json& config,
                     const ParameterSet& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write checkpoint " + path.string());
  const std::string bytes = encode_checkpoint(kind, config, params.flatten());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace prefalign::nn
