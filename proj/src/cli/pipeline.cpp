#include "prefalign/cli/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "prefalign/bench/gap_experiment.hpp"
#include "prefalign/common/log.hpp"
#include "prefalign/common/random.hpp"
#include "prefalign/common/svg.hpp"
#include "prefalign/corpus/curate.hpp"
#include "prefalign/corpus/http_annotator.hpp"
#include "prefalign/corpus/record.hpp"
#include "prefalign/corpus/toy.hpp"
#include "prefalign/cvae/trans_cvae.hpp"
#include "prefalign/eval/embedding.hpp"
#include "prefalign/eval/metrics.hpp"
#include "prefalign/nn/sft.hpp"
#include "prefalign/nn/tokenizer.hpp"
#include "prefalign/pairgen/pairs.hpp"
#include "prefalign/prefopt/dpo.hpp"
#include "prefalign/prefopt/trainer.hpp"

#ifndef PREFALIGN_VERSION
#define PREFALIGN_VERSION "dev"
#endif

namespace prefalign::cli {

namespace fs = std::filesystem;
using corpus::ReviewRecord;
using nlohmann::json;

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> k = {"make-toy", "curate",     "extract-context", "classify", "build-pairs",
                                             "sft",      "cvae-train", "preftune",        "eval"};
  return k;
}

std::vector<std::string> parse_stage_list(const std::string& list) {
  std::set<std::string> wanted;
  std::stringstream in(list);
  for (std::string item; std::getline(in, item, ',');) {
    item = corpus::trim(item);
    if (item.empty()) continue;
    if (item == "all") {
      for (const auto& s : pipeline_stages()) {
        if (s != "make-toy") wanted.insert(s);
      }
      continue;
    }
    const auto& all = pipeline_stages();
    if (std::find(all.begin(), all.end(), item) == all.end()) throw ValidationError("unknown stage \"" + item + "\"");
    wanted.insert(item);
  }
  if (wanted.empty()) throw ValidationError("empty stage list");
  std::vector<std::string> out;
  for (const auto& s : pipeline_stages()) {
    if (wanted.count(s)) out.push_back(s);
  }
  return out;
}

std::uint64_t stage_seed(std::uint64_t global_seed, const std::string& stage) { return derive_seed(global_seed, stage); }

namespace {

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string file_hash(const fs::path& path) { return hex64(fnv1a(read_file(path))); }

Manifest::Manifest(fs::path run_dir) : run_dir_(std::move(run_dir)), path_(run_dir_ / "manifest.jsonl") {}

void Manifest::record(const std::string& stage, std::uint64_t seed, const std::string& config_hash,
                      const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  auto describe = [&](const std::vector<fs::path>& paths) {
    json arr = json::array();
    for (const auto& p : paths) {
      std::string shown = p.string();
      const auto rel = fs::relative(p, run_dir_);
      if (!rel.empty() && rel.native().rfind("..", 0) != 0) shown = rel.string();
      arr.push_back({{"path", shown}, {"fnv1a64", fs::exists(p) ? file_hash(p) : std::string("missing")}});
    }
    return arr;
  };
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  json line{{"stage", stage},
            {"seed", seed},
            {"config_hash", config_hash},
            {"version", PREFALIGN_VERSION},
            {"unix_time", std::chrono::duration_cast<std::chrono::seconds>(now).count()},
            {"inputs", describe(inputs)},
            {"outputs", describe(outputs)}};
  fs::create_directories(run_dir_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error("cannot append to " + path_.string());
  out << line.dump() << '\n';
}

std::vector<json> Manifest::entries() const {
  std::vector<json> out;
  std::ifstream in(path_);
  for (std::string line; std::getline(in, line);) {
    if (!corpus::trim(line).empty()) out.push_back(json::parse(line));
  }
  return out;
}

std::unique_ptr<corpus::Annotator> make_annotator(const RunConfig& cfg) {
  if (cfg.annotator.mock) {
    corpus::set_network_allowed(false);
    return std::make_unique<corpus::MockAnnotator>();
  }
  corpus::set_network_allowed(true);
  corpus::HttpAnnotatorConfig h;
  h.endpoint = cfg.annotator.endpoint;
  h.timeout_s = cfg.annotator.timeout_s;
  h.retries = cfg.annotator.retries;
  h.backoff_ms = cfg.annotator.backoff_ms;
  auto ann = std::make_unique<corpus::HttpAnnotator>(h);
  if (!ann->has_key()) log_warn("annotator: no credential in " + h.key_env + "; sending requests without one");
  return ann;
}

namespace {

// ---------------------------------------------------------------- helpers

struct Paths {
  fs::path corpus, train, validation, test, context, classified, pairs, pairs_val, pairs_test;
  fs::path sft_ckpt, cvae_ckpt, policy_ckpt, sft_log, cvae_log, pref_log;
  fs::path generations, report, summary;

  explicit Paths(const RunConfig& c)
      : corpus(c.corpus_path()),
        train(c.path("splits/train.jsonl")),
        validation(c.path("splits/validation.jsonl")),
        test(c.path("splits/test.jsonl")),
        context(c.path("context.jsonl")),
        classified(c.path("classified.jsonl")),
        pairs(c.path("pairs.jsonl")),
        pairs_val(c.path("pairs_validation.jsonl")),
        pairs_test(c.path("pairs_test.jsonl")),
        sft_ckpt(c.path("checkpoints/sft.ckpt")),
        cvae_ckpt(c.path("checkpoints/cvae.ckpt")),
        policy_ckpt(c.path("checkpoints/policy.ckpt")),
        sft_log(c.path("logs/sft.jsonl")),
        cvae_log(c.path("logs/cvae.jsonl")),
        pref_log(c.path("logs/preftune.jsonl")),
        generations(c.path("generations.jsonl")),
        report(c.path("eval_report.csv")),
        summary(c.path("eval_summary.json")) {}
};

void require(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p)) throw Error("missing input " + p.string() + " (run stage " + producer + " first)");
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::string config_hash(const RunConfig& c) { return hex64(fnv1a(c.to_json().dump())); }

bool usable(const ReviewRecord& r) {
  return r.polarity() != corpus::Polarity::Neutral && r.response_text && !corpus::trim(*r.response_text).empty();
}

std::vector<ReviewRecord> load_with_context(const fs::path& split, const fs::path& context) {
  auto rs = corpus::load_reviews(split);
  if (fs::exists(context)) corpus::attach_context(rs, corpus::load_context(context));
  return rs;
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const fs::path& p) {
    ensure_parent(p);
    out_.open(p, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot write " + p.string());
  }
  void write(const json& j) { out_ << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n'; }

 private:
  std::ofstream out_;
};

void write_text(const fs::path& p, const std::string& text) {
  ensure_parent(p);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

// Prompt (training form) and response token sequences.
struct Tokenized {
  std::string id;
  std::vector<int> prompt;
  std::vector<int> response;
};

std::vector<Tokenized> tokenize_train(const std::vector<ReviewRecord>& rs, int max_len, const std::string& what) {
  nn::ByteTokenizer tok;
  std::vector<Tokenized> out;
  int dropped = 0;
  for (const auto& r : rs) {
    if (!usable(r)) continue;
    Tokenized t{r.id, tok.encode_prompt(corpus::render_prompt(r, true)), tok.encode_response(*r.response_text)};
    if (static_cast<int>(t.prompt.size() + t.response.size()) > max_len) {
      ++dropped;
      continue;
    }
    out.push_back(std::move(t));
  }
  if (dropped) log_warn(what + ": dropped " + std::to_string(dropped) + " examples longer than max_seq_len");
  if (out.empty()) throw ValidationError(what + ": no training examples");
  return out;
}

// ---------------------------------------------------------------- stages

struct StageIO {
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
};

StageIO stage_make_toy(const RunConfig& c, const Paths& p, std::uint64_t seed) {
  auto toy = corpus::make_toy_corpus(c.toy_reviews, seed);
  ensure_parent(p.corpus);
  corpus::save_reviews(p.corpus, toy.records);
  JsonlWriter types(c.path("toy_types.jsonl"));
  for (const auto& r : toy.records) types.write({{"id", r.id}, {"type", toy.intended_type.at(r.id)}});
  log_info("make-toy: " + std::to_string(toy.records.size()) + " reviews");
  return {{}, {p.corpus, c.path("toy_types.jsonl")}};
}

StageIO stage_curate(const RunConfig& c, const Paths& p, std::uint64_t seed) {
  require(p.corpus, "make-toy");
  auto records = corpus::load_reviews(p.corpus);
  auto ann = make_annotator(c);
  auto cc = c.curation;
  cc.seed = seed;
  auto split = corpus::curate(records, *ann, cc);
  ensure_parent(p.train);
  corpus::save_reviews(p.train, split.train);
  corpus::save_reviews(p.validation, split.validation);
  corpus::save_reviews(p.test, split.test);
  log_info("curate: train " + std::to_string(split.train.size()) + ", validation " +
           std::to_string(split.validation.size()) + ", test " + std::to_string(split.test.size()));
  return {{p.corpus}, {p.train, p.validation, p.test}};
}

StageIO stage_extract_context(const RunConfig& c, const Paths& p, std::uint64_t) {
  require(p.train, "curate");
  require(p.validation, "curate");
  auto ann = make_annotator(c);
  // Test-split records never pass through here.
  std::vector<ReviewRecord> all;
  for (const auto* split : {&p.train, &p.validation}) {
    auto rs = corpus::load_reviews(*split);
    all.insert(all.end(), rs.begin(), rs.end());
  }
  int flagged = 0, with_facts = 0;
  for (auto& r : all) {
    r.context_facts.clear();
    if (!usable(r)) continue;
    try {
      r.context_facts = corpus::extract_context(r, *ann);
      with_facts += !r.context_facts.empty();
    } catch (const AnnotatorError& e) {
      ++flagged;
      log_warn("extract-context: record " + r.id + " flagged: " + e.what());
    }
  }
  corpus::save_context(p.context, all);
  log_info("extract-context: " + std::to_string(with_facts) + " of " + std::to_string(all.size()) +
           " records have facts, " + std::to_string(flagged) + " flagged");
  return {{p.train, p.validation}, {p.context}};
}

StageIO stage_classify(const RunConfig& c, const Paths& p, std::uint64_t) {
  auto ann = make_annotator(c);
  JsonlWriter out(p.classified);
  std::map<std::string, int> counts;
  const std::vector<std::pair<std::string, fs::path>> splits = {
      {"train", p.train}, {"validation", p.validation}, {"test", p.test}};
  for (const auto& [name, path] : splits) {
    require(path, "curate");
    for (const auto& r : corpus::load_reviews(path)) {
      if (r.polarity() == corpus::Polarity::Neutral) continue;
      auto cls = pairgen::classify_record(r, *ann);
      ++counts[cls.type.value_or(cls.flag.empty() ? "none" : "flagged")];
      out.write({{"id", r.id}, {"split", name}, {"classification", cls.to_json()}});
    }
  }
  std::string msg = "classify:";
  for (const auto& [t, n] : counts) msg += " " + t + "=" + std::to_string(n);
  log_info(msg);
  return {{p.train, p.validation, p.test}, {p.classified}};
}

std::map<std::string, pairgen::Classification> load_classified(const fs::path& path) {
  std::map<std::string, pairgen::Classification> out;
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::size_t no = 0;
  for (std::string line; std::getline(in, line);) {
    ++no;
    if (corpus::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      out[j.at("id").get<std::string>()] = pairgen::Classification::from_json(j.at("classification"));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), no);
    }
  }
  return out;
}

StageIO stage_build_pairs(const RunConfig& c, const Paths& p, std::uint64_t seed) {
  require(p.classified, "classify");
  require(p.context, "extract-context");
  auto ann = make_annotator(c);
  const auto classes = load_classified(p.classified);
  struct Job {
    fs::path split, out;
    bool with_context;
  };
  const std::vector<Job> jobs = {{p.train, p.pairs, true}, {p.validation, p.pairs_val, true}, {p.test, p.pairs_test, false}};
  for (const auto& job : jobs) {
    auto rs = job.with_context ? load_with_context(job.split, p.context) : corpus::load_reviews(job.split);
    pairgen::PairOptions opts;
    opts.max_attempts = c.annotator.max_attempts;
    opts.include_context = job.with_context;
    std::vector<pairgen::PreferencePair> pairs;
    int skipped = 0, failed = 0;
    for (const auto& r : rs) {
      auto it = classes.find(r.id);
      if (!usable(r) || it == classes.end()) continue;
      try {
        if (auto pair = pairgen::construct_pair(r, it->second, *ann, seed, opts)) pairs.push_back(std::move(*pair));
        else ++skipped;
      } catch (const pairgen::VerificationError& e) {
        ++failed;
        log_warn(std::string("build-pairs: ") + e.what());
      } catch (const AnnotatorError& e) {
        ++failed;
        log_warn("build-pairs: record " + r.id + " flagged: " + e.what());
      }
    }
    pairgen::save_pairs(job.out, pairs);
    log_info("build-pairs: " + job.out.filename().string() + " " + std::to_string(pairs.size()) + " pairs, " +
             std::to_string(skipped) + " without a pair, " + std::to_string(failed) + " flagged");
  }
  return {{p.train, p.validation, p.test, p.context, p.classified}, {p.pairs, p.pairs_val, p.pairs_test}};
}

StageIO stage_sft(const RunConfig& c, const Paths& p, std::uint64_t seed) {
  require(p.train, "curate");
  const auto data = tokenize_train(load_with_context(p.train, p.context), c.model.max_seq_len, "sft");
  std::vector<nn::SftExample> ex;
  for (const auto& t : data) ex.push_back({t.prompt, t.response});
  nn::PolicyModel model(c.model, derive_seed(seed, "init"));
  auto tc = c.sft;
  tc.seed = seed;
  JsonlWriter log(p.sft_log);
  const auto t0 = std::chrono::steady_clock::now();
  auto hist = nn::sft_train(model, ex, tc, [&](const nn::StepLog& s) {
    log.write({{"epoch", s.epoch}, {"step", s.step}, {"loss", s.loss}, {"grad_norm", s.grad_norm}});
  });
  ensure_parent(p.sft_ckpt);
  nn::save_policy(p.sft_ckpt, model);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream msg;
  msg << "sft: " << ex.size() << " examples, " << tc.epochs << " epochs";
  if (!hist.epoch_losses.empty()) msg << ", final loss " << hist.epoch_losses.back();
  msg << " (" << secs << " s)";
  log_info(msg.str());
  std::vector<fs::path> in{p.corpus, p.train};
  if (fs::exists(p.context)) in.push_back(p.context);
  return {in, {p.sft_ckpt, p.sft_log}};
}

StageIO stage_cvae(const RunConfig& c, const Paths& p, std::uint64_t seed) {
  require(p.train, "curate");
  const int max_len = c.cvae_model.max_seq_len;
  nn::ByteTokenizer tok;
  std::vector<cvae::CvaeExample> ex;
  int dropped = 0;
  for (const auto& r : load_with_context(p.train, p.context)) {
    if (!usable(r)) continue;
    cvae::CvaeExample e{tok.encode_prompt(corpus::render_prompt(r, true)), tok.encode_response(*r.response_text)};
    if (static_cast<int>(e.cond.size()) > max_len || static_cast<int>(e.response.size()) > max_len) {
      ++dropped;
      continue;
    }
    ex.push_back(std::move(e));
  }
  if (dropped) log_warn("cvae-train: dropped " + std::to_string(dropped) + " examples longer than max_seq_len");
  if (ex.empty()) throw ValidationError("cvae-train: no training examples");
  cvae::TransCVAE model(c.cvae_model, derive_seed(seed, "init"));
  auto tc = c.cvae_train;
  tc.seed = seed;
  JsonlWriter log(p.cvae_log);
  auto hist = cvae::cvae_train(model, ex, tc, [&](const cvae::CvaeStepLog& s) {
    log.write({{"epoch", s.epoch}, {"step", s.step}, {"elbo_per_token", s.elbo_per_token}, {"grad_norm", s.grad_norm}});
  });
  ensure_parent(p.cvae_ckpt);
  cvae::save_cvae(p.cvae_ckpt, model);
  std::ostringstream msg;
  msg << "cvae-train: " << ex.size() << " examples";
  if (!hist.epoch_elbo.empty()) msg << ", final per-token ELBO " << hist.epoch_elbo.back();
  log_info(msg.str());
  std::vector<fs::path> in{p.corpus, p.train};
  if (fs::exists(p.context)) in.push_back(p.context);
  return {in, {p.cvae_ckpt, p.cvae_log}};
}

std::vector<prefopt::PrefExample> tokenize_pairs(const std::vector<pairgen::PreferencePair>& pairs, int max_len,
                                                 const std::string& what) {
  nn::ByteTokenizer tok;
  std::vector<prefopt::PrefExample> out;
  int dropped = 0;
  for (const auto& pp : pairs) {
    prefopt::PrefExample e{pp.id, tok.encode_prompt(pp.prompt), tok.encode_response(pp.preferred),
                           tok.encode_response(pp.less_preferred)};
    const auto longest = std::max(e.chosen.size(), e.rejected.size());
    if (static_cast<int>(e.prompt.size() + longest) > max_len) {
      ++dropped;
      continue;
    }
    out.push_back(std::move(e));
  }
  if (dropped) log_warn(what + ": dropped " + std::to_string(dropped) + " pairs longer than max_seq_len");
  return out;
}

StageIO stage_preftune(const RunConfig& c, const Paths& p, std::uint64_t seed) {
  require(p.pairs, "build-pairs");
  require(p.sft_ckpt, "sft");
  const bool relaxed = c.pref.lambda > 0.0;
  if (relaxed) require(p.cvae_ckpt, "cvae-train");
  nn::PolicyModel ref = nn::load_policy(p.sft_ckpt);
  nn::PolicyModel theta = ref.clone();
  std::optional<cvae::TransCVAE> density;
  if (relaxed) density.emplace(cvae::load_cvae(p.cvae_ckpt));

  auto pairs = tokenize_pairs(pairgen::load_pairs(p.pairs), ref.config().max_seq_len, "preftune");
  if (relaxed) {
    const int lim = density->config().max_seq_len;
    std::erase_if(pairs, [&](const prefopt::PrefExample& e) { return static_cast<int>(e.prompt.size()) > lim; });
  }
  if (pairs.empty()) throw ValidationError("preftune: no usable preference pairs");
  auto pc = c.pref;
  pc.seed = seed;
  JsonlWriter log(p.pref_log);
  prefopt::PrefHooks hooks;
  hooks.on_batch = [&](const prefopt::PrefLogEntry& e) { log.write(e.to_json()); };
  std::vector<fs::path> outputs{p.policy_ckpt, p.pref_log};
  hooks.on_checkpoint = [&](const nn::PolicyModel& m, int batch) {
    const auto cp = c.path("checkpoints/policy_b" + std::to_string(batch) + ".ckpt");
    nn::save_policy(cp, m);
    outputs.push_back(cp);
  };
  ensure_parent(p.policy_ckpt);
  const auto t0 = std::chrono::steady_clock::now();
  auto result = prefopt::preftune(theta, ref, relaxed ? &*density : nullptr, pairs, pc, hooks);
  nn::save_policy(p.policy_ckpt, theta);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream msg;
  msg << "preftune: " << pairs.size() << " pairs, " << result.log.size() << " batches";
  if (!result.log.empty()) msg << ", last J_pl " << result.log.back().j_pl << ", last J_cr " << result.log.back().j_cr;
  msg << " (" << secs << " s)";
  log_info(msg.str());
  std::vector<fs::path> in{p.corpus, p.pairs, p.sft_ckpt};
  if (relaxed) in.push_back(p.cvae_ckpt);
  return {in, outputs};
}

std::unique_ptr<eval::EmbeddingProvider> make_provider(const RunConfig& c, const nn::PolicyModel& encoder) {
  if (c.eval.embedding == "lm") return std::make_unique<eval::LmEmbedding>(encoder);
  if (c.eval.embedding == "file") {
    return std::make_unique<eval::FileEmbedding>(eval::EmbeddingFile::load(c.eval.embedding_index, c.eval.embedding_data));
  }
  return std::make_unique<eval::HashEmbedding>(c.eval.embedding_dim, derive_seed(c.seed, "eval/embedding"));
}

bool is_matchable(const std::string& t) {
  return t == "T1" || t == "T2" || t == "T3" || t == "P1" || t == "P2" || t == "P3" || t == "P4";
}

json rate_json(const eval::MatchRate& r) {
  return {{"rate", r.rate ? json(*r.rate) : json(nullptr)}, {"matched", r.matched}, {"labeled", r.labeled}};
}

StageIO stage_eval(const RunConfig& c, const Paths& p, std::uint64_t seed) {
  require(p.test, "curate");
  require(p.sft_ckpt, "sft");
  require(p.policy_ckpt, "preftune");
  require(p.classified, "classify");
  const nn::PolicyModel sft = nn::load_policy(p.sft_ckpt);
  const nn::PolicyModel tuned = nn::load_policy(p.policy_ckpt);
  const auto classes = load_classified(p.classified);
  auto ann = make_annotator(c);
  auto provider = make_provider(c, sft);
  nn::ByteTokenizer tok;

  std::vector<std::pair<std::string, const nn::PolicyModel*>> systems = {{"sft", &sft}, {"tuned", &tuned}};
  std::vector<eval::EvalRow> rows;
  std::map<std::string, std::vector<eval::MatchItem>> match_items;
  JsonlWriter gens(p.generations);
  int empty_outputs = 0;
  for (const auto& r : corpus::load_reviews(p.test)) {
    if (!usable(r)) continue;
    auto it = classes.find(r.id);
    const std::string type = it != classes.end() && it->second.type ? *it->second.type : "unclassified";
    const auto prompt = tok.encode_prompt(corpus::render_prompt(r, false));
    for (const auto& [name, model] : systems) {
      nn::SampleOptions so;
      so.greedy = c.eval.greedy;
      so.temperature = c.eval.temperature;
      so.max_len = c.eval.max_new_tokens;
      so.eos = nn::ByteTokenizer::kEos;
      Rng rng(derive_seed(derive_seed(seed, name), r.id));
      const std::string text = tok.decode(nn::sample_response(*model, prompt, so, rng));
      gens.write({{"id", r.id}, {"type", type}, {"system", name}, {"response", text}});

      eval::BertScore s;
      const auto cand = eval::tokenize_words(text);
      if (cand.empty()) {
        ++empty_outputs;
      } else {
        s = eval::bertscore(cand, eval::tokenize_words(*r.response_text), *provider, c.eval.baseline);
      }
      rows.push_back({name, r.id, type, s});

      if (is_matchable(type) && !cand.empty()) {
        eval::MatchItem mi;
        mi.id = r.id;
        mi.review_type = type;
        try {
          if (type[0] == 'T') {
            const auto cues = pairgen::identify_cues(*ann, r.review_text, text);
            mi.n_rational = static_cast<int>(std::count(cues.begin(), cues.begin() + 4, true));
            mi.n_emotional = static_cast<int>(std::count(cues.begin() + 4, cues.end(), true));
          } else {
            mi.style = pairgen::identify_style(*ann, r.review_text, text);
          }
        } catch (const AnnotatorError& e) {
          log_warn("eval: cue labels for " + r.id + " unavailable: " + e.what());
        }
        match_items[name].push_back(mi);
      }
    }
  }
  if (rows.empty()) throw ValidationError("eval: test split has no usable records");
  if (empty_outputs) log_warn("eval: " + std::to_string(empty_outputs) + " empty generations scored as 0");

  const auto summary = eval::summarize(rows, "sft", c.eval.bootstrap_resamples, derive_seed(seed, "bootstrap"));
  eval::write_eval_report(p.report, rows, summary);

  std::vector<prefopt::PrefExample> test_pairs;
  if (fs::exists(p.pairs_test)) {
    test_pairs = tokenize_pairs(pairgen::load_pairs(p.pairs_test), sft.config().max_seq_len, "eval");
  }
  json js{{"n_items", rows.size() / systems.size()}, {"n_test_pairs", test_pairs.size()}, {"systems", json::object()}};
  for (const auto& [name, model] : systems) {
    json sj;
    sj["pref_accuracy"] = test_pairs.empty() ? json(nullptr) : json(prefopt::preference_accuracy(*model, test_pairs));
    for (const auto& s : summary) {
      if (s.system == name && s.type == "overall") {
        sj["mean_R"] = s.mean_r;
        sj["mean_P"] = s.mean_p;
        sj["mean_F"] = s.mean_f;
        if (s.p_value) sj["p_value_F_vs_sft"] = *s.p_value;
      }
    }
    const auto tm = eval::theory_match_rate(match_items[name]);
    json per = json::object();
    for (const auto& [t, r] : tm.per_type) per[t] = rate_json(r);
    sj["theory_match"] = {{"overall", rate_json(tm.overall)},
                          {"per_type", per},
                          {"unlabeled", tm.unlabeled},
                          {"coverage", tm.coverage ? json(*tm.coverage) : json(nullptr)}};
    js["systems"][name] = sj;
  }
  write_text(p.summary, js.dump(2) + "\n");
  std::ostringstream msg;
  msg << "eval: " << js["n_items"] << " test items";
  for (const auto& [name, model] : systems) {
    const auto& sj = js["systems"][name];
    msg << "; " << name << " F " << sj.value("mean_F", 0.0) << " accuracy " << sj["pref_accuracy"];
  }
  log_info(msg.str());
  std::vector<fs::path> in{p.test, p.classified, p.sft_ckpt, p.policy_ckpt};
  if (fs::exists(p.pairs_test)) in.push_back(p.pairs_test);
  return {in, {p.generations, p.report, p.summary}};
}

}  // namespace

void run_stage(const RunConfig& cfg, const std::string& stage) {
  const Paths p(cfg);
  const std::uint64_t seed = stage_seed(cfg.seed, stage);
  StageIO io;
  try {
    if (stage == "make-toy") io = stage_make_toy(cfg, p, seed);
    else if (stage == "curate") io = stage_curate(cfg, p, seed);
    else if (stage == "extract-context") io = stage_extract_context(cfg, p, seed);
    else if (stage == "classify") io = stage_classify(cfg, p, seed);
    else if (stage == "build-pairs") io = stage_build_pairs(cfg, p, seed);
    else if (stage == "sft") io = stage_sft(cfg, p, seed);
    else if (stage == "cvae-train") io = stage_cvae(cfg, p, seed);
    else if (stage == "preftune") io = stage_preftune(cfg, p, seed);
    else if (stage == "eval") io = stage_eval(cfg, p, seed);
    else throw ValidationError("unknown stage \"" + stage + "\"");
    Manifest(cfg.run_dir).record(stage, seed, config_hash(cfg), io.inputs, io.outputs);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

int run_pipeline(const RunConfig& cfg, const std::vector<std::string>& stages) {
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    log_message(LogLevel::Error, std::string("invalid configuration: ") + e.what());
    return 1;
  }
  if (cfg.annotator.mock) corpus::set_network_allowed(false);
  fs::create_directories(cfg.run_dir);
  for (const auto& s : stages) {
    const auto t0 = std::chrono::steady_clock::now();
    log_info("stage " + s + " starting");
    try {
      run_stage(cfg, s);
    } catch (const StageError& e) {
      log_message(LogLevel::Error, e.what());
      return 1;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream msg;
    msg << "stage " << s << " done in " << secs << " s";
    log_info(msg.str());
  }
  return 0;
}

int theorybench_cmd(const RunConfig& cfg) {
  cfg.bench.validate();
  const fs::path dir = cfg.bench_dir.empty() ? cfg.run_dir / "theorybench" : cfg.bench_dir;
  fs::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = bench::gap_experiment(cfg.bench);
  bench::write_gap_csv(report, dir / "gap.csv");
  bench::write_gap_summary_csv(report, dir / "gap_summary.csv");
  std::vector<fs::path> outputs{dir / "gap.csv", dir / "gap_summary.csv"};
  for (const auto& s : report.summaries) {
    std::ostringstream name;
    name << "gap_n" << s.n << "_beta" << s.beta << ".svg";
    bench::write_gap_svg(report, dir / name.str(), s.n, s.beta);
    outputs.push_back(dir / name.str());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool all_ok = true;
  std::printf("log|Pi| = %.6f (|Pi| = |Y|^|X| deterministic tabular policies)\n", report.log_policy_class);
  std::printf("%6s %6s %5s %10s %10s %8s %9s %9s %9s\n", "n", "beta", "rows", "gap_dpo", "gap_ours", "ours<dpo",
              "p_value", "bound_ok", "dpo_ok");
  for (const auto& s : report.summaries) {
    std::printf("%6d %6g %5d %10.5f %10.5f %8.2f %9.4g %4d/%-4d %4d/%-4d\n", s.n, s.beta, s.rows, s.mean_gap_dpo,
                s.mean_gap_ours, s.ours_better_fraction, s.p_value, s.ours_bound_ok, s.rows, s.dpo_bound_ok, s.rows);
    all_ok = all_ok && s.ours_bound_ok == s.rows && s.dpo_bound_ok == s.rows;
  }
  std::printf("%zu rows in %.2f s; every bound %s\n", report.rows.size(), secs, all_ok ? "holds" : "does NOT hold");
  std::fflush(stdout);
  Manifest(cfg.run_dir).record("theorybench", cfg.bench.base_seed, config_hash(cfg), {}, outputs);
  return all_ok ? 0 : 1;
}

namespace {

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    if (!corpus::trim(line).empty()) out.push_back(json::parse(line));
  }
  return out;
}

bool plot_curve(const fs::path& log, const fs::path& out, const std::string& title, const std::string& ylabel,
                const std::vector<std::pair<std::string, std::string>>& keys) {
  if (!fs::exists(log)) return false;
  const auto lines = read_jsonl(log);
  if (lines.empty()) return false;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c"};
  std::vector<Series> series;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    Series s{keys[k].second, {}, {}, colors[k % 3], true};
    for (std::size_t i = 0; i < lines.size(); ++i) {
      s.x.push_back(static_cast<double>(i + 1));
      s.y.push_back(lines[i].value(keys[k].first, 0.0));
    }
    series.push_back(std::move(s));
  }
  PlotSpec spec;
  spec.title = title;
  spec.x_label = "batch";
  spec.y_label = ylabel;
  write_text(out, render_svg(spec, series));
  return true;
}

}  // namespace

int plot_cmd(const RunConfig& cfg) {
  const Paths p(cfg);
  const fs::path dir = cfg.run_dir / "plots";
  int written = 0;
  std::vector<fs::path> outputs;
  auto note = [&](bool ok, const fs::path& f) {
    if (ok) {
      ++written;
      outputs.push_back(f);
      log_info("plot: wrote " + f.string());
    }
  };
  note(plot_curve(p.sft_log, dir / "sft_loss.svg", "SFT loss", "mean token NLL", {{"loss", "loss"}}), dir / "sft_loss.svg");
  note(plot_curve(p.cvae_log, dir / "cvae_elbo.svg", "Density model ELBO", "per-token ELBO",
                  {{"elbo_per_token", "ELBO"}}),
       dir / "cvae_elbo.svg");
  note(plot_curve(p.pref_log, dir / "preftune_jpl.svg", "Preference objective", "J_pl", {{"j_pl", "J_pl"}}),
       dir / "preftune_jpl.svg");
  note(plot_curve(p.pref_log, dir / "preftune_jcr.svg", "Conservatism-relaxing term", "J_cr", {{"j_cr", "J_cr"}}),
       dir / "preftune_jcr.svg");

  const fs::path bench_dir = cfg.bench_dir.empty() ? cfg.run_dir / "theorybench" : cfg.bench_dir;
  if (fs::exists(bench_dir / "gap.csv")) {
    bench::GapReport rep;
    std::ifstream in(bench_dir / "gap.csv");
    std::string line;
    std::getline(in, line);
    std::set<std::pair<int, double>> cells;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::vector<double> v;
      for (std::string f; std::getline(ss, f, ',');) v.push_back(std::stod(f));
      if (v.size() < 10) continue;
      bench::GapRow r;
      r.seed = static_cast<int>(v[0]);
      r.n = static_cast<int>(v[1]);
      r.beta = v[2];
      r.lambda = v[3];
      r.gap_dpo = v[4];
      r.gap_ours = v[5];
      r.cov_opt = v[6];
      r.cov_max = v[7];
      r.bound_ours = v[8];
      r.bound_dpo = v[9];
      rep.rows.push_back(r);
      cells.insert({r.n, r.beta});
    }
    fs::create_directories(dir);
    for (const auto& [n, beta] : cells) {
      std::ostringstream name;
      name << "gap_n" << n << "_beta" << beta << ".svg";
      bench::write_gap_svg(rep, dir / name.str(), n, beta);
      note(true, dir / name.str());
    }
  }
  if (written == 0) {
    log_warn("plot: nothing to plot under " + cfg.run_dir.string());
    return 1;
  }
  Manifest(cfg.run_dir).record("plot", cfg.seed, config_hash(cfg), {}, outputs);
  return 0;
}

}  // namespace prefalign::cli
