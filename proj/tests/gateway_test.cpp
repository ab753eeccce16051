/*
 * Copyright 2026 The faasmesh Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "faasmesh/gateway.hpp"

#include <atomic>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "faasmesh/errors.hpp"
#include "faasmesh/grid.hpp"
#include "test_support.hpp"

namespace faasmesh {
namespace {

using namespace std::chrono_literals;
using nlohmann::json;
using testing::TempDir;

const HeaderList kJson{{"Content-Type", "application/json"}};

struct GatewayFixture : ::testing::Test {
  TempDir dir;
  Catalog catalog;
  std::unique_ptr<Planner> planner;
  std::unique_ptr<Executor> executor;
  std::unique_ptr<Gateway> gateway;

  void SetUp() override {
    std::filesystem::copy_file(testing::fixture("obs1.ms"), dir / "obs1.ms");
    for (const auto& name : {"python-casa-6.5", "wsclean-3.3"}) {
      EnvironmentSpec env;
      env.name = name;
      env.image_ref = "dockerhub/casa";
      catalog.create_environment(env);
    }
    add("tclean", "python-casa-6.5", "tclean.py", "/tclean/");
    add("wsclean", "wsclean-3.3", "wsclean.py", "/wsclean/");
  }

  FunctionSpec add(const std::string& name, const std::string& env, const std::string& code,
                   const std::string& route, HttpMethod method = HttpMethod::Post, int max_pool = 4) {
    FunctionSpec f;
    f.name = name;
    f.env_name = env;
    f.code_ref = code;
    f.url_route = route;
    f.http_method = method;
    f.max_pool = max_pool;
    return catalog.create_function(f);
  }

  void start(ClusterState cluster = ClusterState::single_local_node(),
             std::chrono::milliseconds queue_timeout = 10'000ms) {
    planner = std::make_unique<Planner>(std::move(cluster));
    ExecutorConfig cfg;
    cfg.data_root = dir.path();
    cfg.queue_timeout = queue_timeout;
    cfg.reap_interval = 0ms;
    executor = std::make_unique<Executor>(catalog, cfg);
    gateway = std::make_unique<Gateway>(catalog, *planner, *executor);
  }

  void TearDown() override {
    gateway.reset();
    executor.reset();
  }

  HttpResponse post(const std::string& path, const std::string& body) {
    return gateway->handle_request("POST", path, kJson, body);
  }
};

TEST(ExtractDataRefsTest, KeyConvention) {
  EXPECT_EQ(extract_data_refs(json{{"Input-MS", "obs1.ms"}, {"Output-MS", "img1"}}),
            (std::vector<std::string>{"obs1.ms", "img1"}));
  EXPECT_TRUE(extract_data_refs(json::object()).empty());
  EXPECT_EQ(extract_data_refs(json{{"file", "/data/galaxy.grid"}}),
            (std::vector<std::string>{"galaxy.grid"}));
  EXPECT_TRUE(extract_data_refs(json{{"Input-MS", 3}, {"niter", "obs.ms"}, {"files", "x"}}).empty());
  GatewayConfig custom;
  custom.data_key_suffixes = {"_path"};
  custom.data_key_names = {};
  EXPECT_EQ(extract_data_refs(json{{"in_path", "a"}, {"file", "b"}}, custom),
            (std::vector<std::string>{"a"}));
}

TEST(RouteTableTest, ConflictIsFatal) {
  CatalogSnapshot snap;
  snap.environments.push_back(EnvironmentSpec{"e", "img", RuntimeKind::BuiltinTest, {}, {}});
  FunctionSpec a;
  a.name = "a";
  a.env_name = "e";
  a.url_route = "/same/";
  FunctionSpec b = a;
  b.name = "b";
  snap.functions = {a};
  EXPECT_EQ(build_route_table(snap).size(), 1u);
  snap.functions = {a, b};
  try {
    build_route_table(snap);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RouteConflict);
  }
}

TEST_F(GatewayFixture, TcleanFlowReturnsDataPath) {
  start();
  EXPECT_EQ(gateway->routes(), (std::vector<std::string>{"/tclean/", "/wsclean/"}));
  const auto r = post("/tclean/", R"({"Input-MS":"obs1.ms","Output-MS":"img1"})");
  EXPECT_EQ(r.status, 200) << r.body;
  EXPECT_EQ(r.body, "/data/img1");
  EXPECT_EQ(r.content_type, "text/plain; charset=utf-8");
  EXPECT_EQ(r.header("X-Faas-Node"), "local");
  EXPECT_EQ(r.header("X-Faas-Cold-Start"), "true");
  EXPECT_FALSE(r.header("X-Faas-Duration-Ms").empty());
  EXPECT_FALSE(r.header("X-Faas-Request-Id").empty());
  EXPECT_TRUE(std::filesystem::exists(dir / "img1"));
  const auto again = post("/tclean/", R"({"Input-MS":"obs1.ms","Output-MS":"img2"})");
  EXPECT_EQ(again.header("X-Faas-Cold-Start"), "false");
  EXPECT_NE(again.header("X-Faas-Request-Id"), r.header("X-Faas-Request-Id"));
}

TEST_F(GatewayFixture, StatusMapping) {
  add("boom", "wsclean-3.3", "fail", "/boom/");
  add("getter", "wsclean-3.3", "echo", "/getter/", HttpMethod::Get);
  start();
  EXPECT_EQ(gateway->handle_request("GET", "/tclean/", {}, "").status, 405);
  EXPECT_EQ(gateway->handle_request("GET", "/tclean/", {}, "").header("Allow"), "POST");
  EXPECT_EQ(post("/nosuch/", "{}").status, 404);
  EXPECT_EQ(post("/tclean", "{}").status, 404);
  EXPECT_EQ(post("/tclean/", "{not json").status, 400);
  EXPECT_EQ(post("/tclean/", "[1,2]").status, 400);
  EXPECT_EQ(post("/tclean/", "\"str\"").status, 400);
  EXPECT_EQ(gateway->handle_request("POST", "/tclean/", {{"Content-Type", "application/json"}}, "").status,
            400);

  const auto handler_err = post("/boom/", R"({"message":"bad things"})");
  EXPECT_EQ(handler_err.status, 502);
  EXPECT_NE(handler_err.body.find("bad things"), std::string::npos);

  // an empty body without a JSON content type means no parameters
  const auto get = gateway->handle_request("GET", "/getter/", {}, "");
  EXPECT_EQ(get.status, 200) << get.body;

  EXPECT_EQ(gateway->handle_request("GET", "/healthz", {}, "").body, "ok");
  EXPECT_EQ(gateway->handle_request("POST", "/healthz", {}, "").status, 405);
  const auto snap = json::parse(gateway->handle_request("GET", "/catalog", {}, "").body);
  EXPECT_EQ(snap.at("functions").size(), 4u);
}

TEST_F(GatewayFixture, MissingInputIsHandlerError) {
  start();
  const auto r = post("/tclean/", R"({"Input-MS":"nope.ms","Output-MS":"img1"})");
  EXPECT_EQ(r.status, 502);
  EXPECT_NE(r.body.find("FileNotFound"), std::string::npos);
}

TEST_F(GatewayFixture, NodeHeaderMatchesPlannerOracleCall) {
  auto cluster = load_topology(testing::fixture("topology-3node.json"));
  cluster.data_items["other.ms"] = DataItem{"other.ms", 1ull << 30, {"b"}};
  start(cluster);
  for (const auto& [input, expected] :
       std::vector<std::pair<std::string, std::string>>{{"obs1.ms", "gra-01"}, {"other.ms", "b"}}) {
    const json params{{"Input-MS", input}, {"Output-MS", "out-" + input}};
    const auto snapshot = planner->snapshot();
    const auto want = choose_node(extract_data_refs(params), snapshot, snapshot.weights);
    if (input != "obs1.ms") std::filesystem::copy_file(dir / "obs1.ms", dir / input);
    const auto r = post("/tclean/", params.dump());
    ASSERT_EQ(r.status, 200) << r.body;
    EXPECT_EQ(r.header("X-Faas-Node"), want.node_id);
    EXPECT_EQ(r.header("X-Faas-Node"), expected);
  }
}

TEST_F(GatewayFixture, OutputsBecomeReplicasOnChosenNode) {
  start(load_topology(testing::fixture("topology-3node.json")));
  const auto r = post("/tclean/", R"({"Input-MS":"obs1.ms","Output-MS":"/data/img1"})");
  ASSERT_EQ(r.status, 200) << r.body;
  const auto snap = planner->snapshot();
  ASSERT_TRUE(snap.data_items.contains("img1"));
  EXPECT_EQ(snap.data_items.at("img1").replica_nodes, (std::set<std::string>{"gra-01"}));
  EXPECT_EQ(snap.data_items.at("img1").size_bytes, std::filesystem::file_size(dir / "img1"));
  EXPECT_EQ(snap.load("gra-01"), 0);  // slot handed back
}

TEST_F(GatewayFixture, FailedInvocationRegistersNothing) {
  start();
  post("/tclean/", R"({"Input-MS":"nope.ms","Output-MS":"img9"})");
  EXPECT_FALSE(planner->knows("img9"));
}

TEST_F(GatewayFixture, SaturatedPoolGives503) {
  add("sleepy", "wsclean-3.3", "sleep-ms", "/sleepy/", HttpMethod::Post, 1);
  start(ClusterState::single_local_node(), 200ms);
  std::thread busy([&] { EXPECT_EQ(post("/sleepy/", R"({"ms":800})").status, 200); });
  std::this_thread::sleep_for(100ms);
  const auto r = post("/sleepy/", R"({"ms":1})");
  EXPECT_EQ(r.status, 503);
  EXPECT_NE(r.body.find("CapacityExhausted"), std::string::npos);
  busy.join();
}

TEST_F(GatewayFixture, NoFeasibleNodeGives503) {
  ClusterState c;
  c.nodes["only"] = NodeSpec{"only", "s", 1.0, 1};
  c.current_load["only"] = 1;
  start(c);
  EXPECT_EQ(post("/tclean/", R"({"Input-MS":"obs1.ms","Output-MS":"img1"})").status, 503);
}

TEST_F(GatewayFixture, EmptyCatalogServesManagementOnly) {
  Catalog empty;
  Planner p;
  ExecutorConfig cfg;
  cfg.data_root = dir.path();
  cfg.reap_interval = 0ms;
  Executor ex(empty, cfg);
  Gateway gw(empty, p, ex);
  EXPECT_TRUE(gw.routes().empty());
  EXPECT_EQ(gw.handle_request("GET", "/healthz", {}, "").status, 200);
  EXPECT_EQ(gw.handle_request("POST", "/tclean/", kJson, "{}").status, 404);
}

TEST_F(GatewayFixture, CatalogChangesReRegisterRoutes) {
  start();
  EXPECT_EQ(post("/echo/", "{}").status, 404);
  add("echo", "wsclean-3.3", "echo", "/echo/");
  EXPECT_EQ(post("/echo/", R"({"a":1})").status, 200);
  catalog.delete_function("echo");
  EXPECT_EQ(post("/echo/", "{}").status, 404);
}

TEST_F(GatewayFixture, ServesOverHttp) {
  add("blur", "wsclean-3.3", "mock-blur", "/blur/");
  add("echo", "wsclean-3.3", "echo", "/echo/");
  start();
  const int port = gateway->start("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  httplib::Client client("127.0.0.1", port);

  auto res = client.Post("/tclean/", R"({"Input-MS":"obs1.ms","Output-MS":"img1"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "/data/img1");
  EXPECT_EQ(res->get_header_value("X-Faas-Node"), "local");
  EXPECT_EQ(res->get_header_value("X-Faas-Cold-Start"), "true");

  res = client.Post("/blur/", R"({"file":"/data/obs1.ms"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), grid::kContentType);
  EXPECT_EQ(grid::parse(res->body), grid::gaussian_blur(grid::read(dir / "obs1.ms")));

  res = client.Get("/tclean/");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 405);
  res = client.Delete("/nosuch/");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  res = client.Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->body, "ok");

  // concurrent callers each get their own payload back
  std::vector<std::thread> threads;
  std::atomic<int> matched{0};
  std::set<std::string> ids;
  std::mutex ids_mu;
  for (int i = 0; i < 12; ++i) {
    threads.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", port);
      const std::string body = json{{"caller", i}}.dump();
      auto r = c.Post("/echo/", body, "application/json");
      if (r && r->status == 200 && r->body == body) ++matched;
      std::lock_guard lk(ids_mu);
      if (r) ids.insert(r->get_header_value("X-Faas-Request-Id"));
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(matched, 12);
  EXPECT_EQ(ids.size(), 12u);
  gateway->stop();
}

TEST_F(GatewayFixture, InvokerInterfaceReportsErrorsAsResults) {
  start();
  const auto missing = gateway->invoke("ghost", json::object());
  EXPECT_EQ(missing.status, InvocationStatus::PlatformError);
  EXPECT_NE(missing.output.find("NotFound"), std::string::npos);
  const auto ok = gateway->invoke("wsclean", json{{"Input-MS", "obs1.ms"}});
  EXPECT_TRUE(ok.ok()) << ok.output;
  EXPECT_EQ(ok.output, "/data/obs1-image.fits");
  EXPECT_EQ(ok.node_id, "local");
}

}  // namespace
}  // namespace faasmesh
