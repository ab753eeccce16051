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

#include "faasmesh/workflow.hpp"


#include <gtest/gtest.h>

#include "faasmesh/errors.hpp"
#include "faasmesh/gateway.hpp"
#include "faasmesh/grid.hpp"
#include "test_support.hpp"

namespace faasmesh {
namespace {

using namespace std::chrono_literals;
using nlohmann::json;
using testing::TempDir;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::IoError;
}

WorkflowSpec spec_of(const std::string& text) { return parse_workflow_text(text); }

// Scripted invoker for exercising the runner without a gateway.
struct FakeInvoker : Invoker {
  std::vector<std::pair<std::string, json>> calls;
  std::map<std::string, InvocationResult> replies;

  InvocationResult invoke(const std::string& fn, const json& params) override {
    calls.emplace_back(fn, params);
    if (auto it = replies.find(fn); it != replies.end()) return it->second;
    InvocationResult r;
    r.status = InvocationStatus::Ok;
    r.output = "/data/" + fn + "-out-" + std::to_string(calls.size());
    return r;
  }
};

TEST(WorkflowParseTest, FixtureIsValid) {
  const auto spec = parse_workflow(testing::fixture("pipeline.json"));
  EXPECT_EQ(spec.name, "imaging-pipeline");
  ASSERT_EQ(spec.steps.size(), 3u);
  EXPECT_EQ(spec.steps[2].function_name, "tclean");
  EXPECT_EQ(required_inputs(spec), (std::set<std::string>{"ms", "out"}));
}

TEST(WorkflowParseTest, RejectsBadPlaceholders) {
  const auto forward = R"({"name":"w","steps":[
      {"step_name":"a","function_name":"f","parameters":{"x":"${steps.later.output}"}},
      {"step_name":"later","function_name":"f","parameters":{}}]})";
  EXPECT_EQ(code_of([&] { spec_of(forward); }), ErrorCode::ValidationError);
  for (const char* p : {"${prev.output}", "${input.}", "${steps.a}", "${nope}", "${input.x", "${}"}) {
    const auto text = json{{"name", "w"},
                           {"steps", json::array({{{"step_name", "a"},
                                                   {"function_name", "f"},
                                                   {"parameters", {{"x", p}}}}})}}
                          .dump();
    EXPECT_EQ(code_of([&] { spec_of(text); }), ErrorCode::ValidationError) << p;
  }
  EXPECT_EQ(code_of([] {
              spec_of(R"({"name":"w","steps":[{"step_name":"a","function_name":"f"},
                                            {"step_name":"a","function_name":"f"}]})");
            }),
            ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { spec_of(R"({"name":"w","steps":[)"); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { parse_workflow("/nonexistent/wf.json"); }), ErrorCode::IoError);
}

TEST(WorkflowParseTest, UnknownFunctionNeedsCatalog) {
  Catalog catalog;
  const auto text = R"({"name":"w","steps":[{"step_name":"a","function_name":"ghost"}]})";
  EXPECT_NO_THROW(parse_workflow_text(text));
  EXPECT_EQ(code_of([&] { parse_workflow_text(text, &catalog); }), ErrorCode::ValidationError);
}

TEST(WorkflowRunTest, EmptyWorkflowCompletesWithoutOutput) {
  FakeInvoker inv;
  const auto r = run_workflow(spec_of(R"({"name":"empty","steps":[]})"), json::object(), inv);
  EXPECT_TRUE(r.completed());
  EXPECT_TRUE(r.final_output.empty());
  EXPECT_TRUE(inv.calls.empty());
}

TEST(WorkflowRunTest, SubstitutesAndChains) {
  FakeInvoker inv;
  const auto spec = spec_of(R"({"name":"w","steps":[
      {"step_name":"one","function_name":"f1","parameters":{"Input-MS":"${input.ms}","n":3}},
      {"step_name":"two","function_name":"f2","parameters":{"Input-MS":"${prev.output}",
                                                            "tag":"x-${input.ms}-y"}},
      {"step_name":"three","function_name":"f3","parameters":{"a":"${steps.one.output}",
                                                              "b":["${prev.output}"]}}]})");
  const auto r = run_workflow(spec, json{{"ms", "obs1.ms"}}, inv);
  ASSERT_TRUE(r.completed());
  ASSERT_EQ(inv.calls.size(), 3u);
  EXPECT_EQ(inv.calls[0].second, (json{{"Input-MS", "obs1.ms"}, {"n", 3}}));
  EXPECT_EQ(inv.calls[1].second.at("Input-MS"), r.steps[0].result.output);
  EXPECT_EQ(inv.calls[1].second.at("tag"), "x-obs1.ms-y");
  EXPECT_EQ(inv.calls[2].second.at("a"), r.steps[0].result.output);
  EXPECT_EQ(inv.calls[2].second.at("b")[0], r.steps[1].result.output);
  EXPECT_EQ(r.final_output, r.steps[2].result.output);
  for (const auto& s : r.steps) {
    EXPECT_EQ(s.dispatched_parameters.dump().find("${"), std::string::npos);
  }
}

TEST(WorkflowRunTest, MissingInputRejectedBeforeAnyStep) {
  FakeInvoker inv;
  const auto spec = parse_workflow(testing::fixture("pipeline.json"));
  EXPECT_EQ(code_of([&] { run_workflow(spec, json{{"ms", "obs1.ms"}}, inv); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([&] { run_workflow(spec, json::array(), inv); }), ErrorCode::ValidationError);
  EXPECT_TRUE(inv.calls.empty());
}

TEST(WorkflowRunTest, AbortKeepsCompletedSteps) {
  FakeInvoker inv;
  InvocationResult bad;
  bad.status = InvocationStatus::HandlerError;
  bad.output = "calibration exploded";
  inv.replies["calibrate"] = bad;
  const auto spec = parse_workflow(testing::fixture("pipeline.json"));
  const auto r = run_workflow(spec, json{{"ms", "obs1.ms"}, {"out", "img1"}}, inv);
  EXPECT_FALSE(r.completed());
  EXPECT_EQ(r.aborted_at, "calibration");
  ASSERT_EQ(r.steps.size(), 1u);
  EXPECT_EQ(r.steps[0].step_name, "flagging");
  ASSERT_TRUE(r.failure);
  EXPECT_EQ(r.failure->result.output, "calibration exploded");
  EXPECT_EQ(inv.calls.size(), 2u);  // imaging never dispatched
}

// Full path: gateway, planner and executor with the builtin mock handlers.
struct PipelineFixture : ::testing::Test {
  TempDir dir;
  Catalog catalog;
  std::unique_ptr<Planner> planner;
  std::unique_ptr<Executor> executor;
  std::unique_ptr<Gateway> gateway;

  void SetUp() override {
    std::filesystem::copy_file(testing::fixture("obs1.ms"), dir / "obs1.ms");
    EnvironmentSpec env;
    env.name = "python-casa";
    env.image_ref = "dockerhub/casa";
    catalog.create_environment(env);
    for (const auto& [name, code] : std::vector<std::pair<std::string, std::string>>{
             {"flag", "mock-flag"}, {"calibrate", "mock-calibrate"}, {"tclean", "tclean.py"}}) {
      FunctionSpec f;
      f.name = name;
      f.env_name = "python-casa";
      f.code_ref = code;
      f.url_route = "/" + name + "/";
      catalog.create_function(f);
    }
    auto cluster = load_topology(testing::fixture("topology-3node.json"));
    planner = std::make_unique<Planner>(cluster);
    ExecutorConfig cfg;
    cfg.data_root = dir.path();
    cfg.reap_interval = 0ms;
    executor = std::make_unique<Executor>(catalog, cfg);
    gateway = std::make_unique<Gateway>(catalog, *planner, *executor);
  }
};

TEST_F(PipelineFixture, MatchesCompositionOracleAndFollowsLocality) {
  const auto spec = parse_workflow(testing::fixture("pipeline.json"), &catalog);
  const auto r = run_workflow(spec, json{{"ms", "obs1.ms"}, {"out", "img1"}}, *gateway);
  ASSERT_TRUE(r.completed()) << (r.failure ? r.failure->result.output : "");
  EXPECT_EQ(r.final_output, "/data/img1");

  const auto input = grid::read(testing::fixture("obs1.ms"));
  const auto oracle = grid::gaussian_blur(grid::calibrate(grid::flag(input, 5.0), 2.0));
  EXPECT_EQ(read_file(dir / "img1"), grid::format(oracle));

  for (std::size_t i = 1; i < r.steps.size(); ++i) {
    EXPECT_EQ(r.steps[i].dispatched_parameters.at("Input-MS"), r.steps[i - 1].result.output);
  }
  // obs1.ms lives only on gra-01; each output is then registered there
  for (const auto& s : r.steps) EXPECT_EQ(s.result.node_id, "gra-01") << s.step_name;
}

TEST_F(PipelineFixture, SingleStepEqualsDirectInvocation) {
  const auto spec = spec_of(R"({"name":"one","steps":[
      {"step_name":"img","function_name":"tclean",
       "parameters":{"Input-MS":"${input.ms}","Output-MS":"wf-out"}}]})");
  const auto via_workflow = run_workflow(spec, json{{"ms", "obs1.ms"}}, *gateway);
  const auto direct = gateway->invoke("tclean", json{{"Input-MS", "obs1.ms"}, {"Output-MS", "direct-out"}});
  ASSERT_TRUE(via_workflow.completed());
  ASSERT_TRUE(direct.ok());
  EXPECT_EQ(read_file(dir / "wf-out"), read_file(dir / "direct-out"));
  EXPECT_EQ(via_workflow.steps[0].result.node_id, direct.node_id);
}

TEST_F(PipelineFixture, FailingStepAbortsThroughGateway) {
  const auto spec = spec_of(R"({"name":"bad","steps":[
      {"step_name":"flagging","function_name":"flag","parameters":{"Input-MS":"${input.ms}","threshold":5}},
      {"step_name":"calibration","function_name":"calibrate","parameters":{"Input-MS":"${prev.output}"}}]})");
  const auto r = run_workflow(spec, json{{"ms", "obs1.ms"}}, *gateway);
  EXPECT_FALSE(r.completed());
  EXPECT_EQ(r.aborted_at, "calibration");
  ASSERT_EQ(r.steps.size(), 1u);
  EXPECT_NE(r.failure->result.output.find("MissingParameter: gain"), std::string::npos)
      << r.failure->result.output;
}

}  // namespace
}  // namespace faasmesh
