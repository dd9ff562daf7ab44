#include "prefalign/corpus/toy.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "prefalign/common/error.hpp"
#include "prefalign/common/random.hpp"
#include "prefalign/corpus/lexicon.hpp"

namespace prefalign::corpus {

namespace {

std::string sentence(std::string_view phrase) {
  std::string s(phrase);
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s + ".";
}

int pick(Rng& rng, int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }

template <class T>
const T& pick_from(Rng& rng, std::span<const T> v) {
  return v[pick(rng, static_cast<int>(v.size()))];
}

std::vector<int> choose(Rng& rng, std::vector<int> pool, int k) {
  stable_shuffle(pool, rng);
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : " ") + p;
  return out;
}

std::string negative_response(Rng& rng, int n_r, int n_e) {
  std::vector<int> cues = choose(rng, {0, 1, 2, 3}, n_r);
  for (int e : choose(rng, {4, 5, 6, 7}, n_e)) cues.push_back(e);
  std::vector<std::string> parts;
  for (int c : cues) parts.emplace_back(pick_from(rng, lexicon::cue_sentences(c)));
  parts.emplace_back(pick_from(rng, lexicon::facts()));
  return join(parts);
}

}  // namespace

ToyCorpus make_toy_corpus(int n_reviews, std::uint64_t seed) {
  if (n_reviews < 0) throw ValidationError("make_toy_corpus: negative size");
  ToyCorpus out;
  Rng rng(derive_seed(seed, "toy-corpus"));
  for (int i = 0; i < n_reviews; ++i) {
    ReviewRecord r;
    char id[16];
    std::snprintf(id, sizeof id, "toy%04d", i);
    r.id = id;
    r.hotel_id = "H" + std::to_string(i % 10);
    const double u = uniform01(rng);
    std::string type;
    if (u < 0.62) {
      r.rating = 1 + pick(rng, 2);
      const double t = uniform01(rng);
      int du = 0, pu = 0, iu = 0;
      if (t < 0.3) {
        type = "T1";
        pu = 1 + pick(rng, 3);
        iu = pick(rng, pu);
      } else if (t < 0.6) {
        type = "T2";
        iu = 1 + pick(rng, 3);
        pu = pick(rng, iu);
      } else if (t < 0.9) {
        type = "T3";
        pu = iu = 1 + pick(rng, 2);
      } else {
        type = "T4";
      }
      du = type == "T4" ? 1 + pick(rng, 2) : pick(rng, 2);
      std::vector<std::string> body;
      for (int a : choose(rng, {0, 1, 2}, du)) body.push_back(sentence(pick_from(rng, lexicon::complaint_phrases(a))));
      for (int a : choose(rng, {3, 4, 5}, pu)) body.push_back(sentence(pick_from(rng, lexicon::complaint_phrases(a))));
      for (int a : choose(rng, {6, 7, 8}, iu)) body.push_back(sentence(pick_from(rng, lexicon::complaint_phrases(a))));
      stable_shuffle(body, rng);
      r.review_text = std::string(pick(rng, 2) ? "Disappointing stay" : "Not again") + " ---SEP--- " + join(body);
      int n_r = 1, n_e = 1;
      if (type == "T1") n_r = 2 + pick(rng, 2), n_e = pick(rng, 2);
      if (type == "T2") n_e = 2 + pick(rng, 2), n_r = pick(rng, 2);
      if (type == "T3") n_r = n_e = 1 + pick(rng, 2);
      std::string resp = negative_response(rng, n_r, n_e);
      if (uniform01(rng) < 0.08) resp += " Frankly, " + std::string(pick_from(rng, lexicon::rude_markers())) + ".";
      r.response_text = resp;
    } else if (u < 0.95) {
      r.rating = 4 + pick(rng, 2);
      const double t = uniform01(rng);
      std::vector<std::string> body;
      auto add = [&](std::span<const std::string_view> bank) { body.push_back(sentence(pick_from(rng, bank))); };
      if (t < 0.3) {
        type = "P1";
        add(lexicon::positive_objective());
        if (pick(rng, 2)) add(lexicon::positive_objective());
      } else if (t < 0.55) {
        type = "P2";
        add(lexicon::positive_subjective());
        if (pick(rng, 2)) add(lexicon::positive_subjective());
      } else if (t < 0.7) {
        type = "P3";
        add(lexicon::positive_objective());
        add(lexicon::negative_objective());
      } else if (t < 0.85) {
        type = "P4";
        add(lexicon::positive_subjective());
        add(lexicon::negative_subjective());
      } else {
        type = "P5";
        add(lexicon::positive_objective());
        add(lexicon::positive_subjective());
      }
      body.erase(std::unique(body.begin(), body.end()), body.end());
      r.review_text = std::string(pick(rng, 2) ? "Great hotel" : "Lovely stay") + " ---SEP--- " + join(body);
      std::vector<std::string> parts;
      if (type == "P2" || type == "P3") {
        const auto po = lexicon::positive_objective(), ps = lexicon::positive_subjective();
        const std::string low = to_lower(r.review_text);
        for (std::size_t k = 0; k < po.size(); ++k) {
          if (low.find(po[k]) != std::string::npos) parts.emplace_back(lexicon::tailored_sentences()[k]);
        }
        for (std::size_t k = 0; k < ps.size(); ++k) {
          if (low.find(ps[k]) != std::string::npos) parts.emplace_back(lexicon::tailored_sentences()[po.size() + k]);
        }
      } else {
        parts.emplace_back(pick_from(rng, lexicon::template_sentences()));
        parts.emplace_back(lexicon::template_sentences()[1]);
      }
      if (pick(rng, 2)) parts.emplace_back(pick_from(rng, lexicon::facts()));
      r.response_text = join(parts);
    } else {
      type = "neutral";
      r.rating = 3;
      r.review_text = "Average ---SEP--- The stay was fine overall.";
      r.response_text = "Thank you for your review.";
    }
    if (type != "neutral" && uniform01(rng) < 0.03) r.response_text.reset();
    out.intended_type[r.id] = type;
    out.records.push_back(std::move(r));
  }
  return out;
}

}  // namespace prefalign::corpus
