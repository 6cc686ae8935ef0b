#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "contcomm/server.hpp"
#include "support.hpp"

// after Eigen: resolv.h (pulled in by httplib) defines a _res macro
#include <httplib.h>

using namespace contcomm;
using namespace contcomm::gateway;
using nlohmann::json;

namespace {

// The planted fixture replayed into a pipeline, served on a free port.
struct Served {
  PipelineConfig cfg;
  Resources res;
  SimulatedClock clock;
  std::unique_ptr<Pipeline> pipeline;
  std::unique_ptr<LivenessMonitor> liveness;
  std::unique_ptr<GatewayServer> server;
  std::filesystem::path dir = testing::scratch_dir("server");

  Served() {
    cfg = load_config(testing::data_dir() / "fixtures" / "planted20_config.json");
    cfg.dead_letter = (dir / "dl.jsonl").string();
    res = load_resources(cfg);
    pipeline = std::make_unique<Pipeline>(cfg, res.classifier, clock, res.gazetteer, res.stopwords);
    StreamRunner runner(*pipeline, make_opener(cfg, res.dictionary));
    runner.replay(&clock);
    liveness = std::make_unique<LivenessMonitor>(Millis{1000}, [] { return 1; }, [] {}, clock);
    liveness->check_once();
    server = std::make_unique<GatewayServer>(*pipeline, liveness.get());
    server->bind("127.0.0.1", 0);
    server->start();
  }
  ~Served() {
    server->stop();
    std::filesystem::remove_all(dir);
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", server->port());
    c.set_read_timeout(5, 0);
    return c;
  }

  std::size_t topic_of(const std::string& member) const {
    for (const auto& c : pipeline->communities())
      if (std::binary_search(c.cluster.member_ids.begin(), c.cluster.member_ids.end(), member)) return c.topic;
    FAIL("no community holds " << member);
    return 0;
  }
};

json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

// Collects SSE frames from /events on a background thread.
class EventStream {
 public:
  EventStream(int port, const std::string& user) {
    thread_ = std::thread([this, port, user] {
      httplib::Client c("127.0.0.1", port);
      c.set_read_timeout(10, 0);
      auto r = c.Get("/events?user_id=" + user, [&](const char* data, std::size_t n) {
        std::lock_guard lock(mu_);
        buffer_.append(data, n);
        for (auto end = buffer_.find("\n\n"); end != std::string::npos; end = buffer_.find("\n\n")) {
          frames_.push_back(buffer_.substr(0, end));
          buffer_.erase(0, end + 2);
        }
        return !quit_;
      });
      std::lock_guard lock(mu_);
      if (r) status_ = r->status;
      finished_ = true;
    });
  }
  ~EventStream() {
    quit_ = true;
    thread_.join();
  }

  // (event name, payload) pairs seen so far, pings skipped
  std::vector<std::pair<std::string, json>> events() const {
    std::lock_guard lock(mu_);
    std::vector<std::pair<std::string, json>> out;
    for (const auto& f : frames_) {
      if (f.rfind("event: ", 0) != 0) continue;
      const auto nl = f.find('\n');
      out.emplace_back(f.substr(7, nl - 7), json::parse(f.substr(nl + 7)));
    }
    return out;
  }
  bool wait_for(std::size_t n, Millis limit = Millis{5000}) const {
    const auto end = std::chrono::steady_clock::now() + limit;
    while (events().size() < n) {
      if (std::chrono::steady_clock::now() > end) return false;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return true;
  }
  bool finished() const {
    std::lock_guard lock(mu_);
    return finished_;
  }
  int status() const {
    std::lock_guard lock(mu_);
    return status_;
  }

 private:
  mutable std::mutex mu_;
  std::string buffer_;
  std::vector<std::string> frames_;
  std::atomic<bool> quit_{false};
  bool finished_ = false;
  int status_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("GET /topics, /communities and /health") {
  Served s;
  auto c = s.client();

  auto topics = body_of(c.Get("/topics"));
  REQUIRE(topics.size() == 2);
  CHECK(topics[0]["words"].size() == 10);
  CHECK(topics[1]["topic"] == 1);

  auto all = body_of(c.Get("/communities"));
  CHECK(all.size() == 4);
  CHECK(all == s.pipeline->community_report());

  const auto rain = s.topic_of("p01");
  auto one = body_of(c.Get("/communities?topic=" + std::to_string(rain)));
  CHECK(one.size() == 2);
  for (const auto& x : one) CHECK(x["topic"] == rain);

  auto houston = body_of(c.Get("/communities?bbox=29,-96,30,-95"));
  CHECK(houston.size() == 2);
  auto both = body_of(c.Get("/communities?topic=" + std::to_string(rain) + "&bbox=29,-96,30,-95"));
  REQUIRE(both.size() == 1);
  CHECK(both[0]["member_ids"].front() == "p01");

  for (auto bad : {"/communities?topic=x", "/communities?topic=-1", "/communities?bbox=1,2,3"}) {
    auto r = c.Get(bad);
    REQUIRE(r);
    CHECK(r->status == 400);
    CHECK(json::parse(r->body)["error"] == "InvalidArgument");
  }

  auto health = body_of(c.Get("/health"));
  CHECK(health["batches"] == 1);
  CHECK(health["communities"] == 4);
  CHECK(health["pins"] == 4);
  CHECK(health["fake_removed"] == 1);
  CHECK(health["model"]["k"] == 2);
  CHECK(health["liveness"]["checks"] == 1);
}

TEST_CASE("POST and DELETE /subscriptions") {
  Served s;
  auto c = s.client();

  auto r = c.Post("/subscriptions", R"({"user_id": "ann", "topics": [0], "bbox": [29, -96, 30, -95]})",
                  "application/json");
  REQUIRE(r);
  CHECK(r->status == 201);
  auto sub = json::parse(r->body);
  CHECK(sub["user_id"] == "ann");
  CHECK(sub["topics"] == json::array({0}));
  CHECK(sub["bbox"] == json::array({29, -96, 30, -95}));
  CHECK(s.pipeline->hub().subscription("ann"));

  r = c.Post("/subscriptions", R"({"user_id": "ann", "topics": [1], "bbox": {"south": 0, "west": 0, "north": 1, "east": 1}})",
             "application/json");
  REQUIRE(r);
  CHECK(json::parse(r->body)["topics"] == json::array({0, 1}));

  struct Bad {
    const char* body;
    int status;
    const char* code;
  };
  for (const auto& b : {Bad{R"({"user_id": "bo", "topics": [2]})", 404, "UnknownTopic"},
                        Bad{R"({"user_id": "bo", "topics": []})", 400, "InvalidArgument"},
                        Bad{R"({"topics": [0]})", 400, "InvalidArgument"},
                        Bad{R"({"user_id": "bo", "topics": [0], "bbox": [30, 0, 29, 1]})", 400, "InvalidArgument"},
                        Bad{R"({"user_id": "bo", "topics": [0], "bbox": "everywhere"})", 400, "InvalidArgument"},
                        Bad{"{not json", 400, "InvalidArgument"}}) {
    r = c.Post("/subscriptions", b.body, "application/json");
    REQUIRE(r);
    CHECK(r->status == b.status);
    CHECK(json::parse(r->body)["error"] == b.code);
  }
  CHECK_FALSE(s.pipeline->hub().subscription("bo"));

  r = c.Delete("/subscriptions/ann/0");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(json::parse(r->body)["unsubscribed"] == true);
  CHECK(s.pipeline->hub().subscription("ann")->topics == std::set<std::size_t>{1});

  r = c.Delete("/subscriptions/nobody/0");
  REQUIRE(r);
  CHECK(r->status == 404);
  CHECK(json::parse(r->body)["error"] == "UnknownUser");
  r = c.Delete("/subscriptions/ann/zero");
  REQUIRE(r);
  CHECK(r->status == 400);
  r = c.Delete("/subscriptions/ann/7");
  REQUIRE(r);
  CHECK(r->status == 404);
}

TEST_CASE("GET /events streams pin upserts and removals") {
  Served s;
  auto c = s.client();
  const auto rain = s.topic_of("p01");

  auto r = c.Get("/events");
  REQUIRE(r);
  CHECK(r->status == 400);
  r = c.Get("/events?user_id=ghost");
  REQUIRE(r);
  CHECK(r->status == 404);

  REQUIRE(c.Post("/subscriptions", json{{"user_id", "viv"}, {"topics", {0, 1}}}.dump(), "application/json"));
  REQUIRE(c.Post("/subscriptions", json{{"user_id", "oslo"}, {"topics", {0, 1}}, {"bbox", {59, 10, 60, 11}}}.dump(),
                 "application/json"));
  EventStream viv(s.server->port(), "viv"), oslo(s.server->port(), "oslo");
  REQUIRE(viv.wait_for(4));
  for (const auto& [name, data] : viv.events()) {
    CHECK(name == "pin_upsert");
    CHECK(data["subscribed"] == true);
    CHECK(data.contains("pin_id"));
    CHECK(data.contains("lat"));
    CHECK(data["member_count"] >= 4);
    CHECK(data.contains("last_updated"));
  }

  // unsubscribing from the rain topic removes exactly its two pins
  REQUIRE(c.Delete("/subscriptions/viv/" + std::to_string(rain)));
  REQUIRE(viv.wait_for(6));
  auto ev = viv.events();
  for (std::size_t i = 4; i < 6; ++i) {
    CHECK(ev[i].first == "pin_removed");
    CHECK(ev[i].second["topic"] == rain);
  }

  // pins expiring reach the stream as removals too
  s.clock.advance(std::chrono::hours(25));
  CHECK(s.pipeline->expire_pins().size() == 4);
  REQUIRE(viv.wait_for(8));
  ev = viv.events();
  for (std::size_t i = 6; i < 8; ++i) {
    CHECK(ev[i].first == "pin_removed");
    CHECK(ev[i].second["topic"] != rain);
  }

  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  CHECK(viv.events().size() == 8);
  CHECK(oslo.events().empty());  // nothing inside the Oslo box

  s.server->stop();
  for (int i = 0; i < 200 && !(viv.finished() && oslo.finished()); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  CHECK(viv.finished());
  CHECK(oslo.finished());
}

TEST_CASE("queries answer while a batch is running") {
  Served s;
  std::atomic<bool> in_batch{false}, release{false};
  s.pipeline->set_fault_hook([&](std::uint64_t, int) {
    in_batch = true;
    while (!release) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  });
  std::thread batch([&] { s.pipeline->run_batch({testing::record("late", "flood rain", "2021-09-01T12:05:00Z")}); });
  while (!in_batch) std::this_thread::sleep_for(std::chrono::milliseconds(5));

  auto c = s.client();
  const auto t0 = std::chrono::steady_clock::now();
  CHECK(body_of(c.Get("/communities")).size() == 4);
  CHECK(body_of(c.Get("/health"))["batches"] == 2);
  CHECK(body_of(c.Get("/topics")).size() == 2);
  REQUIRE(c.Post("/subscriptions", R"({"user_id": "q", "topics": [0]})", "application/json")->status == 201);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(2));
  release = true;
  batch.join();
}

TEST_CASE("bind errors and lifecycle") {
  Served s;
  PipelineConfig cfg;
  SimulatedClock clock;
  Pipeline p(cfg, std::make_shared<AcceptAllClassifier>(), clock);
  GatewayServer taken(p);
  CHECK_THROWS_AS(taken.bind("127.0.0.1", s.server->port()), Error);
  GatewayServer unbound(p);
  CHECK_THROWS_AS(unbound.run(), Error);
  unbound.stop();
  unbound.stop();  // idempotent

  auto c = s.client();
  CHECK(c.Get("/health"));
  s.server->stop();
  CHECK_FALSE(c.Get("/health"));
}
