#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace prefalign::nn {
class PolicyModel;
}

namespace prefalign::eval {

using Matrix = std::vector<std::vector<double>>;

/// Maps a token sequence to one unit-norm vector per token.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Matrix embed(const std::vector<std::string>& tokens) const = 0;
  virtual int dim() const = 0;
};

/// Static vectors seeded by a hash of the lower-cased token: identical
/// tokens match exactly, distinct tokens are near-orthogonal.
class HashEmbedding : public EmbeddingProvider {
 public:
  explicit HashEmbedding(int dim = 64, std::uint64_t seed = 0);
  Matrix embed(const std::vector<std::string>& tokens) const override;
  int dim() const override { return dim_; }

 private:
  int dim_;
  std::uint64_t seed_;
};

/// Contextual vectors from a language model: tokens are joined by single
/// spaces, run through the model, and each token's byte states are
/// mean-pooled. Sequences longer than the model context are embedded in
/// windows.
class LmEmbedding : public EmbeddingProvider {
 public:
  explicit LmEmbedding(const nn::PolicyModel& model);
  Matrix embed(const std::vector<std::string>& tokens) const override;
  int dim() const override;

 private:
  const nn::PolicyModel& model_;
};

/// Precomputed embeddings: a JSON index {"dim": d, "entries": {id:
/// {"offset": k, "rows": n}}} beside a binary file of little-endian float32
/// values, entry rows stored contiguously starting at float offset k.
class EmbeddingFile {
 public:
  static EmbeddingFile load(const std::filesystem::path& index_path, const std::filesystem::path& data_path);
  static void save(const std::filesystem::path& index_path, const std::filesystem::path& data_path,
                   const std::map<std::string, Matrix>& entries);

  int dim() const { return dim_; }
  bool contains(const std::string& id) const { return entries_.count(id) != 0; }
  /// Rows normalized to unit length.
  const Matrix& matrix(const std::string& id) const;

 private:
  int dim_ = 0;
  std::map<std::string, Matrix> entries_;
};

/// Token-level provider over an EmbeddingFile whose entries are single
/// rows keyed by the (lower-cased) token text.
class FileEmbedding : public EmbeddingProvider {
 public:
  explicit FileEmbedding(EmbeddingFile file) : file_(std::move(file)) {}
  Matrix embed(const std::vector<std::string>& tokens) const override;
  int dim() const override { return file_.dim(); }

 private:
  EmbeddingFile file_;
};

/// Lower-cased whitespace tokens with surrounding punctuation removed.
std::vector<std::string> tokenize_words(const std::string& text);

void normalize_rows(Matrix& m);

}  // namespace prefalign::eval
