#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <unistd.h>

#include <httplib.h>

#include "prefalign/common/error.hpp"
#include "prefalign/common/log.hpp"
#include "prefalign/common/random.hpp"
#include "prefalign/corpus/annotator.hpp"
#include "prefalign/corpus/curate.hpp"
#include "prefalign/corpus/http_annotator.hpp"
#include "prefalign/corpus/record.hpp"
#include "prefalign/corpus/toy.hpp"

using namespace prefalign;
using namespace prefalign::corpus;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("prefalign_corpus_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

ReviewRecord rec(std::string id, int rating, std::string review, std::optional<std::string> response) {
  ReviewRecord r;
  r.id = std::move(id);
  r.rating = rating;
  r.review_text = std::move(review);
  r.response_text = std::move(response);
  return r;
}

std::string words(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
  return s;
}

// Scores every response from a fixed table keyed by id.
struct TableScorer : Annotator {
  std::map<std::string, int> scores;
  std::string complete(const AnnotatorRequest& r) override {
    return "{\"score\": " + std::to_string(scores.at(r.fields["id"].get<std::string>())) + "}";
  }
};

}  // namespace

TEST_CASE("load_reviews keeps file order") {
  auto p = scratch("three.jsonl");
  write_file(p,
             "{\"id\":\"a\",\"review\":\"bad\",\"response\":\"sorry\",\"rating\":1,\"hotel_id\":null}\n"
             "{\"id\":\"b\",\"review\":\"good\",\"response\":null,\"rating\":5,\"hotel_id\":\"h9\"}\n"
             "\n"
             "{\"id\":\"c\",\"review\":\"meh\",\"response\":\"ok\",\"rating\":3}\n");
  auto rs = load_reviews(p);
  REQUIRE(rs.size() == 3);
  CHECK(rs[0].id == "a");
  CHECK(rs[1].id == "b");
  CHECK(rs[2].id == "c");
  CHECK(rs[0].polarity() == Polarity::Negative);
  CHECK(rs[1].polarity() == Polarity::Positive);
  CHECK(rs[2].polarity() == Polarity::Neutral);
  CHECK_FALSE(rs[1].response_text.has_value());
  CHECK(rs[1].hotel_id == std::optional<std::string>("h9"));
}

TEST_CASE("missing rating names the line") {
  auto p = scratch("norating.jsonl");
  write_file(p,
             "{\"id\":\"a\",\"review\":\"x\",\"response\":null,\"rating\":2}\n"
             "{\"id\":\"b\",\"review\":\"y\",\"response\":null}\n");
  try {
    load_reviews(p);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("malformed json and bad rating are rejected") {
  auto p = scratch("bad.jsonl");
  write_file(p, "{\"id\":\"a\",\n");
  CHECK_THROWS_AS(load_reviews(p), ParseError);
  write_file(p, "{\"id\":\"a\",\"review\":\"x\",\"response\":null,\"rating\":7}\n");
  CHECK_THROWS_AS(load_reviews(p), Error);
  CHECK_THROWS_AS(load_reviews(scratch("does_not_exist.jsonl")), Error);
}

TEST_CASE("duplicate id is an error") {
  auto p = scratch("dup.jsonl");
  write_file(p,
             "{\"id\":\"r1\",\"review\":\"x\",\"response\":null,\"rating\":2}\n"
             "{\"id\":\"r1\",\"review\":\"y\",\"response\":null,\"rating\":4}\n");
  try {
    load_reviews(p);
    FAIL("expected a duplicate-id error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
    CHECK(std::string(e.what()).find("r1") != std::string::npos);
  }
}

TEST_CASE("save then load round trips field for field") {
  auto toy = make_toy_corpus(60, 3);
  toy.records[0].context_facts = {"Room 12 has a balcony.", "Breakfast starts at 7 am."};
  toy.records[1].hotel_id = "h\"quoted\"";
  toy.records[2].review_text = "Unicode caf\xc3\xa9 \xe2\x9c\x93 and a\nnewline";
  auto p = scratch("roundtrip.jsonl");
  save_reviews(p, toy.records);
  auto back = load_reviews(p);
  CHECK(back == toy.records);

  auto cp = scratch("context.jsonl");
  save_context(cp, toy.records);
  auto ctx = load_context(cp);
  CHECK(ctx.at(toy.records[0].id) == toy.records[0].context_facts);
  auto stripped = back;
  for (auto& r : stripped) r.context_facts.clear();
  attach_context(stripped, ctx);
  CHECK(stripped[0].context_facts == toy.records[0].context_facts);
}

TEST_CASE("word count splits on whitespace") {
  CHECK(word_count("") == 0);
  CHECK(word_count("  one\ttwo\n three  ") == 3);
  CHECK(word_count(words(400)) == 400);
}

TEST_CASE("render_prompt with and without facts") {
  auto r = rec("n1", 1, "The room was dirty.", "We apologize.");
  r.context_facts = {"The hotel has 2 smoke alarms in suite 6.", "The manager is Ana."};
  const std::string with = render_prompt(r, true);
  CHECK(with ==
        "I want you to act as a hotel manager. Your task is to write a response to the following negative customer "
        "review. You know the following facts about the customer and the hotel:\n\n"
        "1. The hotel has 2 smoke alarms in suite 6.\n"
        "2. The manager is Ana.\n"
        "\nThe room was dirty.");
  const std::string without = render_prompt(r, false);
  CHECK(without.find("You know the following facts") == std::string::npos);
  CHECK(without ==
        "I want you to act as a hotel manager. Your task is to write a response to the following negative customer "
        "review.\n\nThe room was dirty.");
  CHECK(render_prompt(r, true) == with);

  auto none = r;
  none.context_facts.clear();
  CHECK(render_prompt(none, true) == without);

  auto pos = rec("p1", 5, "Lovely stay.", "Thanks.");
  CHECK(render_prompt(pos, false).find("following positive customer review.") != std::string::npos);
  CHECK_THROWS_AS(render_prompt(rec("z", 3, "ok", "ok"), false), ValidationError);
}

TEST_CASE("extract_context through the mock") {
  MockAnnotator m;
  auto same = rec("s", 2, "The pool was closed at 9 pm. Staff were rude.", "The pool was closed at 9 pm. Staff were rude.");
  CHECK(extract_context(same, m).empty());

  auto canned = rec("c1", 2, "bad", "resp");
  m.set_canned("context", "c1", R"({"facts": ["f1", "f2"], "explanations": []})");
  CHECK(extract_context(canned, m) == std::vector<std::string>{"f1", "f2"});

  m.set_canned("context", "c2", R"(Here you go: {"facts": [{"fact": " f3 ", "source": "x"}]} done)");
  CHECK(extract_context(rec("c2", 2, "bad", "resp"), m) == std::vector<std::string>{"f3"});

  auto fresh = rec("c3", 1, "Noisy room.", "Sorry. Our quiet rooms are on floor 5. Please call 555 0101.");
  auto facts = extract_context(fresh, m);
  CHECK(facts == std::vector<std::string>{"Our quiet rooms are on floor 5.", "Please call 555 0101."});

  CHECK_THROWS_AS(extract_context(rec("x", 1, "a", std::nullopt), m), ValidationError);
  m.set_canned("context", "c4", "no json here");
  CHECK_THROWS_AS(extract_context(rec("c4", 2, "a", "b"), m), AnnotatorError);
}

TEST_CASE("curate respects cap, threshold and counts") {
  std::vector<ReviewRecord> rs;
  TableScorer scorer;
  // Negatives with varied lengths, some long, some low quality.
  for (int i = 0; i < 30; ++i) {
    const std::string id = "n" + std::to_string(i);
    const int len = i < 3 ? 450 + i : 10 + 13 * i;
    rs.push_back(rec(id, 1 + i % 2, "bad", words(len)));
    scorer.scores[id] = i % 5 == 0 ? 2 : 4;
  }
  for (int i = 0; i < 20; ++i) {
    const std::string id = "p" + std::to_string(i);
    rs.push_back(rec(id, 4 + i % 2, "good", words(5 + i)));
    scorer.scores[id] = i % 4 == 0 ? 1 : 5;
  }
  rs.push_back(rec("u0", 3, "fine", "thanks"));
  rs.push_back(rec("m0", 1, "bad", std::nullopt));

  CurationConfig cfg;
  cfg.n_neg_train = 8;
  cfg.n_pos_train = 5;
  cfg.n_neg_val = 3;
  cfg.n_pos_val = 2;
  cfg.n_neg_test = 5;
  cfg.n_pos_test = 4;
  cfg.seed = 7;
  auto split = curate(rs, scorer, cfg);

  CHECK(split.train.size() == 13);
  CHECK(split.validation.size() == 5);
  CHECK(split.test.size() == 9);
  std::set<std::string> ids;
  std::size_t prev_len = SIZE_MAX;
  int negs = 0;
  for (const auto& r : split.train) {
    CHECK(word_count(*r.response_text) <= 400);
    CHECK(scorer.scores.at(r.id) >= 3);
    if (r.polarity() == Polarity::Negative) {
      // longest first
      CHECK(word_count(*r.response_text) <= prev_len);
      prev_len = word_count(*r.response_text);
      ++negs;
    }
  }
  CHECK(negs == 8);
  // the eight longest passing negatives within the cap: i = 29,28,27,26,24,23,22,21
  std::vector<std::string> expect = {"n29", "n28", "n27", "n26", "n24", "n23", "n22", "n21"};
  for (int i = 0; i < 8; ++i) CHECK(split.train[i].id == expect[i]);
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    for (const auto& r : *part) {
      CHECK(ids.insert(r.id).second);
      CHECK(r.polarity() != Polarity::Neutral);
      CHECK(r.response_text.has_value());
    }
  }

  auto again = curate(rs, scorer, cfg);
  CHECK(again.train == split.train);
  CHECK(again.validation == split.validation);
  CHECK(again.test == split.test);

  cfg.seed = 8;
  auto other = curate(rs, scorer, cfg);
  CHECK((other.validation != split.validation || other.test != split.test));
}

TEST_CASE("curate with zero counts and shortfalls") {
  MockAnnotator m;
  auto toy = make_toy_corpus(40, 1);
  CurationConfig zero;
  zero.n_neg_train = zero.n_pos_train = zero.n_neg_val = zero.n_pos_val = zero.n_neg_test = zero.n_pos_test = 0;
  auto s = curate(toy.records, m, zero);
  CHECK(s.train.empty());
  CHECK(s.validation.empty());
  CHECK(s.test.empty());
  CHECK(curate({}, m, zero).train.empty());

  CurationConfig big = zero;
  big.n_neg_train = 1000;
  try {
    curate(toy.records, m, big);
    FAIL("expected a shortfall error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("short by") != std::string::npos);
  }
  big.strict = false;
  int warnings = 0;
  set_log_sink([&](LogLevel l, const std::string&) { warnings += l == LogLevel::Warn; });
  auto loose = curate(toy.records, m, big);
  set_log_sink({});
  CHECK(warnings == 1);
  CHECK(!loose.train.empty());

  CurationConfig bad;
  bad.word_cap = 0;
  CHECK_THROWS_AS(curate(toy.records, m, bad), ValidationError);
  bad = CurationConfig{};
  bad.n_pos_test = -1;
  CHECK_THROWS_AS(curate(toy.records, m, bad), ValidationError);
}

TEST_CASE("raising the quality threshold never grows train") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ReviewRecord> rs;
    TableScorer scorer;
    for (int i = 0; i < 40; ++i) {
      const std::string id = "r" + std::to_string(i);
      const int rating = (rng() % 2) ? 1 + static_cast<int>(rng() % 2) : 4 + static_cast<int>(rng() % 2);
      rs.push_back(rec(id, rating, "text", words(1 + static_cast<int>(rng() % 50))));
      scorer.scores[id] = static_cast<int>(rng() % 6);
    }
    CurationConfig cfg;
    cfg.strict = false;
    cfg.n_neg_train = 1 + static_cast<int>(rng() % 20);
    cfg.n_pos_train = 1 + static_cast<int>(rng() % 20);
    cfg.n_neg_val = cfg.n_pos_val = cfg.n_neg_test = cfg.n_pos_test = 0;
    cfg.seed = trial;
    set_log_level(LogLevel::Error);
    std::size_t prev = SIZE_MAX;
    for (int t = 0; t <= 5; ++t) {
      cfg.quality_threshold = t;
      const auto n = curate(rs, scorer, cfg).train.size();
      CHECK(n <= prev);
      prev = n;
    }
    set_log_level(LogLevel::Info);
  }
}

TEST_CASE("toy corpus is deterministic and well formed") {
  auto a = make_toy_corpus(200, 5);
  auto b = make_toy_corpus(200, 5);
  CHECK(a.records == b.records);
  REQUIRE(a.records.size() == 200);
  int neg = 0, pos = 0, neu = 0;
  std::set<std::string> ids;
  for (const auto& r : a.records) {
    r.validate();
    CHECK(ids.insert(r.id).second);
    CHECK(a.intended_type.count(r.id) == 1);
    neg += r.polarity() == Polarity::Negative;
    pos += r.polarity() == Polarity::Positive;
    neu += r.polarity() == Polarity::Neutral;
  }
  CHECK(neg > pos);
  CHECK(pos > neu);
  CHECK(neu > 0);
  CHECK(make_toy_corpus(200, 6).records != a.records);
}

TEST_CASE("mock quality heuristics") {
  MockAnnotator m;
  CHECK(score_quality(m, rec("q1", 1, "bad", "")) == 0);
  CHECK(score_quality(m, rec("q2", 1, "bad", "We are truly sorry and will fix the shower.")) == 4);
  m.set_canned("quality", "q3", "{\"score\": 9}");
  CHECK_THROWS_AS(score_quality(m, rec("q3", 1, "bad", "x")), AnnotatorError);
  CHECK(m.calls() == 3);
}

TEST_CASE("json helpers") {
  CHECK(extract_json("prefix {\"a\": {\"b\": \"}\"}} suffix")["a"]["b"] == "}");
  CHECK_THROWS_AS(extract_json("nothing"), AnnotatorError);
  auto yn = parse_yes_no(nlohmann::json::parse(R"({"answers": {"1": "Yes", "2": "no", "3": "YES."}})"), 3);
  CHECK(yn == std::vector<bool>{true, false, true});
  CHECK_THROWS_AS(parse_yes_no(nlohmann::json::parse(R"({"1": "Yes"})"), 2), AnnotatorError);
  auto g = parse_generated(R"({"Response": "Hello.", "Explanation": {"Apology": "Yes"}})");
  CHECK(g.response == "Hello.");
  CHECK(g.explanation["Apology"] == "Yes");
}

namespace {

struct LocalServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};
  std::string last_auth;
  std::string last_body;
  int fail_first = 0;
  int status_on_fail = 500;

  LocalServer() {
    server.Post("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++hits;
      last_auth = req.get_header_value("Authorization");
      last_body = req.body;
      if (n <= fail_first) {
        res.status = status_on_fail;
        res.set_content("{}", "application/json");
        return;
      }
      res.set_content(R"({"text": "{\"score\": 5}"})", "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    thread.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/complete"; }
};

}  // namespace

TEST_CASE("http annotator talks to a local server") {
  const std::string secret = "sk-test-0123456789-very-secret";
  ::setenv("PREFALIGN_TEST_KEY", secret.c_str(), 1);
  LocalServer srv;
  srv.fail_first = 2;
  HttpAnnotatorConfig cfg;
  cfg.endpoint = srv.endpoint();
  cfg.key_env = "PREFALIGN_TEST_KEY";
  cfg.timeout_s = 5;
  HttpAnnotator ann(cfg);
  CHECK(ann.has_key());
  std::vector<int> sleeps;
  ann.set_sleeper([&](int ms) { sleeps.push_back(ms); });

  std::vector<std::string> logged;
  set_log_sink([&](LogLevel, const std::string& m) { logged.push_back(m); });
  set_network_allowed(true);
  AnnotatorRequest req;
  req.task = "quality";
  req.prompt = "rate this";
  req.max_tokens = 7;
  const std::string text = ann.complete(req);
  set_log_sink({});

  CHECK(text == "{\"score\": 5}");
  CHECK(srv.hits == 3);
  CHECK(sleeps == std::vector<int>{500, 1000});
  CHECK(srv.last_auth == "Bearer " + secret);
  auto body = nlohmann::json::parse(srv.last_body);
  CHECK(body["prompt"] == "rate this");
  CHECK(body["max_tokens"] == 7);
  CHECK(body.contains("temperature"));
  CHECK(logged.size() == 2);
  for (const auto& m : logged) CHECK(m.find(secret) == std::string::npos);

  // retries exhausted
  srv.hits = 0;
  srv.fail_first = 100;
  try {
    ann.complete(req);
    FAIL("expected exhaustion");
  } catch (const AnnotatorError& e) {
    CHECK(std::string(e.what()).find(secret) == std::string::npos);
  }
  CHECK(srv.hits == 4);

  // client errors are not retried
  srv.hits = 0;
  srv.status_on_fail = 401;
  CHECK_THROWS_AS(ann.complete(req), AnnotatorError);
  CHECK(srv.hits == 1);

  // network switch
  srv.hits = 0;
  set_network_allowed(false);
  CHECK_THROWS_AS(ann.complete(req), AnnotatorError);
  CHECK(srv.hits == 0);
  set_network_allowed(true);
  ::unsetenv("PREFALIGN_TEST_KEY");
}

TEST_CASE("http annotator rejects bad endpoints") {
  HttpAnnotatorConfig cfg;
  cfg.endpoint = "https://example.com/x";
  CHECK_THROWS_AS(HttpAnnotator{cfg}, ValidationError);
  cfg.endpoint = "";
  CHECK_THROWS_AS(HttpAnnotator{cfg}, ValidationError);
  cfg.endpoint = "http://";
  CHECK_THROWS_AS(HttpAnnotator{cfg}, ValidationError);
}
