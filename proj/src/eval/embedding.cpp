#include "prefalign/eval/embedding.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "prefalign/common/error.hpp"
#include "prefalign/common/random.hpp"
#include "prefalign/nn/policy.hpp"
#include "prefalign/nn/tensor.hpp"
#include "prefalign/nn/tokenizer.hpp"

namespace prefalign::eval {

void normalize_rows(Matrix& m) {
  for (auto& row : m) {
    double s = 0.0;
    for (double v : row) s += v * v;
    s = std::sqrt(s);
    if (!(s > 0.0)) throw ValidationError("cannot normalize a zero embedding");
    for (double& v : row) v /= s;
  }
}

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::size_t a = 0, b = cur.size();
    while (a < b && std::ispunct(static_cast<unsigned char>(cur[a]))) ++a;
    while (b > a && std::ispunct(static_cast<unsigned char>(cur[b - 1]))) --b;
    if (b > a) out.push_back(cur.substr(a, b - a));
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) flush();
    else cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  flush();
  return out;
}

HashEmbedding::HashEmbedding(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw ValidationError("HashEmbedding: dim must be positive");
}

Matrix HashEmbedding::embed(const std::vector<std::string>& tokens) const {
  Matrix out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    std::string low = t;
    for (char& c : low) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    Rng rng(derive_seed(seed_, low));
    std::vector<double> v(dim_);
    for (double& x : v) x = standard_normal(rng);
    out.push_back(std::move(v));
  }
  normalize_rows(out);
  return out;
}

LmEmbedding::LmEmbedding(const nn::PolicyModel& model) : model_(model) {}

int LmEmbedding::dim() const { return model_.config().d_model; }

Matrix LmEmbedding::embed(const std::vector<std::string>& tokens) const {
  nn::NoGradGuard guard;
  nn::ByteTokenizer tok;
  const int window = model_.config().max_seq_len;
  Matrix out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    // Pack as many whole tokens as fit after BOS.
    std::vector<int> ids{nn::ByteTokenizer::kBos};
    std::vector<std::pair<int, int>> spans;
    std::size_t j = i;
    for (; j < tokens.size(); ++j) {
      auto bytes = tok.encode(tokens[j]);
      if (bytes.empty()) bytes = {' '};
      const int need = static_cast<int>(bytes.size()) + (j > i ? 1 : 0);
      if (static_cast<int>(ids.size()) + need > window) break;
      if (j > i) ids.push_back(' ');
      spans.emplace_back(static_cast<int>(ids.size()), static_cast<int>(bytes.size()));
      ids.insert(ids.end(), bytes.begin(), bytes.end());
    }
    if (j == i) throw ValidationError("LmEmbedding: token longer than the model context");
    const nn::Tensor h = model_.hidden_states(ids);
    for (const auto& [start, len] : spans) {
      std::vector<double> v(h.cols(), 0.0);
      for (int r = start; r < start + len; ++r) {
        for (int c = 0; c < h.cols(); ++c) v[c] += h.at(r, c) / len;
      }
      out.push_back(std::move(v));
    }
    i = j;
  }
  normalize_rows(out);
  return out;
}

EmbeddingFile EmbeddingFile::load(const std::filesystem::path& index_path, const std::filesystem::path& data_path) {
  std::ifstream ji(index_path);
  if (!ji) throw Error("cannot open " + index_path.string());
  nlohmann::json idx;
  try {
    idx = nlohmann::json::parse(ji);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("embedding index " + index_path.string() + ": " + e.what());
  }
  std::ifstream bin(data_path, std::ios::binary);
  if (!bin) throw Error("cannot open " + data_path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(bin)), {});
  const std::size_t n_floats = raw.size() / 4;

  EmbeddingFile f;
  f.dim_ = idx.at("dim").get<int>();
  if (f.dim_ < 1) throw ValidationError("embedding index: dim must be positive");
  for (const auto& [id, e] : idx.at("entries").items()) {
    const std::size_t off = e.at("offset").get<std::size_t>();
    const std::size_t rows = e.at("rows").get<std::size_t>();
    if (off + rows * f.dim_ > n_floats) throw ValidationError("embedding entry " + id + " runs past the data file");
    Matrix m(rows, std::vector<double>(f.dim_));
    for (std::size_t r = 0; r < rows; ++r) {
      for (int c = 0; c < f.dim_; ++c) {
        std::uint32_t bits;
        std::memcpy(&bits, raw.data() + 4 * (off + r * f.dim_ + c), 4);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        m[r][c] = std::bit_cast<float>(bits);
      }
    }
    normalize_rows(m);
    f.entries_.emplace(id, std::move(m));
  }
  return f;
}

void EmbeddingFile::save(const std::filesystem::path& index_path, const std::filesystem::path& data_path,
                         const std::map<std::string, Matrix>& entries) {
  int dim = -1;
  nlohmann::json idx{{"entries", nlohmann::json::object()}};
  std::ofstream bin(data_path, std::ios::binary);
  if (!bin) throw Error("cannot write " + data_path.string());
  std::size_t offset = 0;
  for (const auto& [id, m] : entries) {
    for (const auto& row : m) {
      if (dim < 0) dim = static_cast<int>(row.size());
      if (static_cast<int>(row.size()) != dim) throw ValidationError("embedding rows must share one dimension");
      for (double v : row) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        bin.write(reinterpret_cast<const char*>(&bits), 4);
      }
    }
    idx["entries"][id] = {{"offset", offset}, {"rows", m.size()}};
    offset += m.size() * static_cast<std::size_t>(std::max(dim, 0));
  }
  idx["dim"] = std::max(dim, 1);
  std::ofstream ji(index_path);
  if (!ji) throw Error("cannot write " + index_path.string());
  ji << idx.dump(2) << '\n';
}

const Matrix& EmbeddingFile::matrix(const std::string& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw ValidationError("no embedding entry \"" + id + "\"");
  return it->second;
}

Matrix FileEmbedding::embed(const std::vector<std::string>& tokens) const {
  Matrix out;
  for (const auto& t : tokens) {
    std::string low = t;
    for (char& c : low) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto& m = file_.matrix(low);
    if (m.size() != 1) throw ValidationError("token entry \"" + low + "\" must have exactly one row");
    out.push_back(m[0]);
  }
  return out;
}

}  // namespace prefalign::eval
