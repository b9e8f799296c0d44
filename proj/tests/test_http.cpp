#include "doctest.h"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"

#include "dcs/error.hpp"
#include "dcs/http_services.hpp"
#include "dcs/serve.hpp"
#include "toy_env.hpp"

using namespace dcs;

namespace {

/// An httplib server on an ephemeral loopback port, stopped on destruction.
class StubServer {
 public:
  StubServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  HttpEndpoint endpoint(const std::string& path, int retries = 2) const {
    HttpEndpoint e;
    e.url = "http://127.0.0.1:" + std::to_string(port_) + path;
    e.timeout = std::chrono::milliseconds(2000);
    e.max_retries = retries;
    e.backoff = std::chrono::milliseconds(1);
    return e;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

Json body_of(const httplib::Request& req) { return Json::parse(req.body); }

void reply(httplib::Response& res, const Json& j) { res.set_content(j.dump(), "application/json"); }

HttpEndpoint dead_endpoint() {
  httplib::Server probe;
  const int port = probe.bind_to_any_port("127.0.0.1");
  probe.stop();
  HttpEndpoint e;
  e.url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  e.timeout = std::chrono::milliseconds(300);
  e.max_retries = 1;
  e.backoff = std::chrono::milliseconds(1);
  return e;
}

}  // namespace

TEST_CASE("url validation") {
  CHECK_NOTHROW(validate_url("http://localhost:8080/v1/embed"));
  CHECK_NOTHROW(validate_url("https://example.com"));
  CHECK_THROWS_AS(validate_url("ftp://x"), ConfigError);
  CHECK_THROWS_AS(validate_url("localhost:8080"), ConfigError);
  CHECK_THROWS_AS(validate_url("http://host:port/x"), ConfigError);
}

TEST_CASE("embedder request shape, auth header and dimension probe") {
  StubServer stub;
  std::atomic<int> calls{0};
  std::string auth;
  Json last;
  stub.server().Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    auth = req.get_header_value("Authorization");
    last = body_of(req);
    Json data = Json::array();
    for (std::size_t i = 0; i < last.at("input").size(); ++i) data.push_back({{"embedding", {1.0, 0.0, 0.5}}});
    reply(res, {{"data", data}});
  });
  ::setenv("DCS_TEST_TOKEN", "s3cret", 1);
  auto ep = stub.endpoint("/embed");
  ep.auth_env = "DCS_TEST_TOKEN";
  HttpEmbedder e(ep);
  CHECK(e.dim() == 3);
  CHECK(e.dim() == 3);
  CHECK(calls == 1);
  const auto v = e.embed({"a", "b"}, "Instruct: x");
  CHECK(v.size() == 2);
  CHECK(last.at("instruction") == "Instruct: x");
  CHECK(auth == "Bearer s3cret");
  e.embed({"a"}, "");
  CHECK_FALSE(last.contains("instruction"));
  CHECK(e.tag() == "remote:" + ep.url);
  ::unsetenv("DCS_TEST_TOKEN");
}

TEST_CASE("5xx and 429 are retried, other 4xx fail at once") {
  StubServer stub;
  std::atomic<int> flaky{0};
  std::atomic<int> bad{0};
  stub.server().Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
    const int n = ++flaky;
    if (n == 1) {
      res.status = 503;
    } else if (n == 2) {
      res.status = 429;
    } else {
      reply(res, {{"ok", true}});
    }
  });
  stub.server().Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
    ++bad;
    res.status = 400;
    res.set_content("nope", "text/plain");
  });
  CHECK(post_json(stub.endpoint("/flaky"), Json::object(), "x").at("ok") == true);
  CHECK(flaky == 3);
  try {
    post_json(stub.endpoint("/bad"), Json::object(), "scorer");
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.dependency() == "scorer");
  }
  CHECK(bad == 1);
}

TEST_CASE("retries are bounded") {
  StubServer stub;
  std::atomic<int> calls{0};
  stub.server().Post("/down", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 500;
  });
  CHECK_THROWS_AS(post_json(stub.endpoint("/down", 2), Json::object(), "llm"), TransportError);
  CHECK(calls == 3);
}

TEST_CASE("unparseable body is a transport error") {
  StubServer stub;
  stub.server().Post("/text", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  CHECK_THROWS_AS(post_json(stub.endpoint("/text"), Json::object(), "llm"), TransportError);
}

TEST_CASE("connection refused is a transport error naming the dependency") {
  HttpEmbedder e(dead_endpoint(), 8);
  try {
    e.embed({"x"}, "");
    FAIL("expected TransportError");
  } catch (const TransportError& err) {
    CHECK(err.dependency() == "embedder");
  }
}

TEST_CASE("llm accepts both answer shapes and sends the system message") {
  StubServer stub;
  Json last;
  stub.server().Post("/plain", [&](const httplib::Request& req, httplib::Response& res) {
    last = body_of(req);
    reply(res, {{"text", "INTENT: x"}});
  });
  stub.server().Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"choices", {{{"message", {{"role", "assistant"}, {"content", "Yes."}}}}}}});
  });
  stub.server().Post("/empty", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"choices", Json::array()}});
  });
  LlmRequest r;
  r.system = "sys";
  r.prompt = "p";
  r.max_tokens = 8;
  CHECK(HttpLlmClient(stub.endpoint("/plain")).complete(r) == "INTENT: x");
  CHECK(last.at("messages").size() == 2);
  CHECK(last.at("messages")[0].at("role") == "system");
  CHECK(last.at("max_tokens") == 8);
  CHECK(HttpLlmClient(stub.endpoint("/chat")).complete(r) == "Yes.");
  CHECK_THROWS_AS(HttpLlmClient(stub.endpoint("/empty")).complete(r), TransportError);
}

TEST_CASE("scorer modes and answer forms") {
  StubServer stub;
  Json last;
  stub.server().Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
    last = body_of(req);
    reply(res, {{"score", 0.25}});
  });
  stub.server().Post("/text", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"text", "yes"}});
  });
  stub.server().Post("/logprobs", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"text", "no"}, {"logprobs", {{"yes", std::log(0.9)}, {"no", std::log(0.1)}}}});
  });
  HttpScorer pair(stub.endpoint("/score"));
  CHECK(pair.score("q", "d") == 0.25);
  CHECK(last.at("query") == "q");
  CHECK(last.at("document") == "d");
  HttpScorer raw(stub.endpoint("/score"), HttpScorer::Mode::raw);
  raw.score("q", "d");
  CHECK(last.at("prompt") == build_rerank_prompt("q", "d").assembled);
  CHECK(HttpScorer(stub.endpoint("/text")).score("q", "d") == 1.0);
  CHECK(HttpScorer(stub.endpoint("/logprobs")).score("q", "d") == doctest::Approx(0.9));
}

TEST_CASE("listwise reranker client") {
  StubServer stub;
  stub.server().Post("/order", [&](const httplib::Request& req, httplib::Response& res) {
    const auto n = body_of(req).at("documents").size();
    Json order = Json::array();
    for (std::size_t i = n; i > 0; --i) order.push_back(i - 1);
    reply(res, {{"order", order}});
  });
  stub.server().Post("/broken", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"order", "x"}});
  });
  CHECK(HttpListwiseReranker(stub.endpoint("/order")).order("q", {"a", "b", "c"}) ==
        std::vector<std::size_t>{2, 1, 0});
  CHECK_THROWS_AS(HttpListwiseReranker(stub.endpoint("/broken")).order("q", {"a"}), TransportError);
}

TEST_CASE("pipeline over a remote embedder equals the in-process mock") {
  StubServer stub;
  MockEmbedder mock;
  stub.server().Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    const auto texts = body_of(req).at("input").get<std::vector<std::string>>();
    Json data = Json::array();
    for (const auto& v : mock.embed(texts, "")) data.push_back({{"embedding", v}});
    reply(res, {{"data", data}});
  });
  const testing_support::ToyEnv env;
  HttpEmbedder remote(stub.endpoint("/embed"));
  auto services = env.services();
  services.embedder = &remote;
  Pipeline p(services);
  Pipeline local(env.services());
  const auto a = p.retrieve(env.task("toy-001"), {});
  const auto b = local.retrieve(env.task("toy-001"), {});
  REQUIRE(a.candidates.size() == b.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i) CHECK(a.candidates[i].ns == b.candidates[i].ns);
}

TEST_CASE("serve handler: success, validation and dependency failures") {
  const testing_support::ToyEnv env;
  AppConfig cfg;
  cfg.scorer.endpoint = "oracle";
  Pipeline p(env.services(false));
  ScorerProvider scorers(cfg, &p.documents());
  RetrievalService svc(p, PipelineConfig{}, scorers, 40);

  const auto& t = env.task("toy-001");
  Json req{{"code_before", t.code_before}, {"ground_truth", t.ground_truth}, {"rerank", true}, {"k", 10}};
  auto r = svc.retrieve(req.dump());
  CHECK(r.status == 200);
  CHECK(r.body.at("ground_truth_rank") == 1);
  CHECK(r.body.at("reranked") == true);
  CHECK(r.body.at("candidates").size() == 10);

  r = svc.retrieve(Json{{"code_before", t.code_before}}.dump());
  CHECK(r.status == 200);
  CHECK_FALSE(r.body.contains("ground_truth_rank"));

  CHECK(svc.retrieve("{").status == 400);
  CHECK(svc.retrieve("[]").status == 400);
  CHECK(svc.retrieve(Json{{"code_middle", "x"}}.dump()).status == 400);
  CHECK(svc.retrieve(Json{{"code_before", "x"}, {"k", 0}}.dump()).status == 400);
  CHECK(svc.retrieve(Json{{"code_before", "x"}, {"strategy", "bogus"}}.dump()).status == 400);
  const auto empty = svc.retrieve(Json{{"code_before", "  "}}.dump());
  CHECK(empty.status == 400);
  CHECK(empty.body.at("error") == "task 'request': empty query");

  const auto no_llm = svc.retrieve(Json{{"code_before", "x"}, {"strategy", "hypothetical"}}.dump());
  CHECK(no_llm.status == 503);
  CHECK(no_llm.body.at("dependency") == "llm");

  const auto scoped = svc.retrieve(
      Json{{"code_before", t.code_before}, {"scope", {{"scope", "sn_itsm"}, {"include_global", false}}}}.dump());
  CHECK(scoped.status == 200);
  for (const auto& c : scoped.body.at("candidates")) {
    CHECK(env.toy.corpus.find(c.at("namespace").get<std::string>())->scope == "sn_itsm");
  }
}

TEST_CASE("serve handler: scorer missing and embedder down give 503") {
  const testing_support::ToyEnv env;
  Pipeline p(env.services());
  ScorerProvider none;
  RetrievalService svc(p, PipelineConfig{}, none, 40);
  const auto r = svc.retrieve(Json{{"code_before", "var a;"}, {"rerank", 5}}.dump());
  CHECK(r.status == 503);
  CHECK(r.body.at("dependency") == "scorer");

  HttpEmbedder down(dead_endpoint(), 512);
  auto services = env.services();
  services.embedder = &down;
  Pipeline broken(services);
  RetrievalService svc2(broken, PipelineConfig{}, none, 40);
  const auto d = svc2.retrieve(Json{{"code_before", "var a;"}}.dump());
  CHECK(d.status == 503);
  CHECK(d.body.at("dependency") == "embedder");
}

TEST_CASE("mounted routes answer over http") {
  const testing_support::ToyEnv env;
  Pipeline p(env.services());
  ScorerProvider none;
  RetrievalService svc(p, PipelineConfig{}, none, 40);
  httplib::Server server;
  mount(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  const auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  const auto res = client.Post("/v1/retrieve", Json{{"code_before", env.task("toy-001").code_before}}.dump(),
                               "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(Json::parse(res->body).at("candidates").at(0).at("namespace") == "ArrayUtil");
  const auto bad = client.Post("/v1/retrieve", "{", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  server.stop();
  th.join();
}
