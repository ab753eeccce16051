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

#include <functional>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "faasmesh/errors.hpp"
#include "faasmesh/util.hpp"

namespace faasmesh {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& why) {
  throw Error(ErrorCode::ValidationError, why);
}

struct Placeholder {
  enum Kind { Input, Prev, Step } kind;
  std::string name;
};

Placeholder parse_placeholder(std::string_view body) {
  constexpr std::string_view kInput = "input.";
  constexpr std::string_view kSteps = "steps.";
  constexpr std::string_view kOutput = ".output";
  if (body == "prev.output") return {Placeholder::Prev, {}};
  if (body.substr(0, kInput.size()) == kInput && body.size() > kInput.size()) {
    return {Placeholder::Input, std::string(body.substr(kInput.size()))};
  }
  if (body.substr(0, kSteps.size()) == kSteps && body.size() > kSteps.size() + kOutput.size() &&
      body.substr(body.size() - kOutput.size()) == kOutput) {
    return {Placeholder::Step,
            std::string(body.substr(kSteps.size(), body.size() - kSteps.size() - kOutput.size()))};
  }
  invalid(fmt::format("bad placeholder '${{{}}}'", body));
}

// Calls `on_placeholder` for each placeholder in `text` and splices in what
// it returns.
std::string rewrite(std::string_view text, const std::function<std::string(const Placeholder&)>& fn) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("${", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    const auto close = text.find('}', open + 2);
    if (close == std::string_view::npos) {
      invalid(fmt::format("unterminated placeholder in '{}'", text));
    }
    out.append(text.substr(pos, open - pos));
    out.append(fn(parse_placeholder(text.substr(open + 2, close - open - 2))));
    pos = close + 1;
  }
  return out;
}

void visit_strings(const json& value, const std::function<void(const std::string&)>& fn) {
  if (value.is_string()) {
    fn(value.get<std::string>());
  } else if (value.is_structured()) {
    for (const auto& v : value) visit_strings(v, fn);
  }
}

json map_strings(const json& value, const std::function<std::string(const std::string&)>& fn) {
  if (value.is_string()) return fn(value.get<std::string>());
  if (value.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : value.items()) out[k] = map_strings(v, fn);
    return out;
  }
  if (value.is_array()) {
    json out = json::array();
    for (const auto& v : value) out.push_back(map_strings(v, fn));
    return out;
  }
  return value;
}

}  // namespace

std::set<std::string> required_inputs(const WorkflowSpec& spec) {
  std::set<std::string> keys;
  for (const auto& step : spec.steps) {
    visit_strings(step.parameters, [&](const std::string& s) {
      rewrite(s, [&](const Placeholder& p) {
        if (p.kind == Placeholder::Input) keys.insert(p.name);
        return std::string{};
      });
    });
  }
  return keys;
}

void validate_workflow(const WorkflowSpec& spec, const Catalog* catalog) {
  std::set<std::string> earlier;
  for (std::size_t i = 0; i < spec.steps.size(); ++i) {
    const auto& step = spec.steps[i];
    if (step.step_name.empty()) invalid(fmt::format("step {} has no step_name", i + 1));
    if (earlier.contains(step.step_name)) {
      invalid(fmt::format("duplicate step_name '{}'", step.step_name));
    }
    if (!step.parameters.is_object()) {
      invalid(fmt::format("step '{}': parameters must be an object", step.step_name));
    }
    if (catalog && !catalog->find_function(step.function_name)) {
      invalid(fmt::format("step '{}': unknown function '{}'", step.step_name, step.function_name));
    }
    visit_strings(step.parameters, [&](const std::string& s) {
      rewrite(s, [&](const Placeholder& p) {
        if (p.kind == Placeholder::Prev && i == 0) {
          invalid(fmt::format("step '{}': ${{prev.output}} in the first step", step.step_name));
        }
        if (p.kind == Placeholder::Step && !earlier.contains(p.name)) {
          invalid(fmt::format("step '{}': ${{steps.{}.output}} does not refer to an earlier step",
                              step.step_name, p.name));
        }
        return std::string{};
      });
    });
    earlier.insert(step.step_name);
  }
}

WorkflowSpec parse_workflow_text(std::string_view text, const Catalog* catalog,
                                 std::string_view source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(fmt::format("{}: malformed JSON at byte {}: {}", source, e.byte, e.what()));
  }
  WorkflowSpec spec;
  try {
    if (!doc.is_object()) invalid(fmt::format("{}: workflow must be a JSON object", source));
    spec.name = doc.at("name").get<std::string>();
    for (const auto& s : doc.at("steps")) {
      WorkflowStep step;
      step.step_name = s.at("step_name").get<std::string>();
      step.function_name = s.at("function_name").get<std::string>();
      step.parameters = s.value("parameters", json::object());
      spec.steps.push_back(std::move(step));
    }
  } catch (const json::exception& e) {
    invalid(fmt::format("{}: {}", source, e.what()));
  }
  validate_workflow(spec, catalog);
  return spec;
}

WorkflowSpec parse_workflow(const std::filesystem::path& path, const Catalog* catalog) {
  return parse_workflow_text(read_file(path), catalog, path.string());
}

json substitute_placeholders(const json& parameters, const SubstitutionScope& scope) {
  return map_strings(parameters, [&](const std::string& s) {
    return rewrite(s, [&](const Placeholder& p) -> std::string {
      switch (p.kind) {
        case Placeholder::Input: {
          if (!scope.inputs.contains(p.name)) invalid(fmt::format("missing workflow input '{}'", p.name));
          const auto& v = scope.inputs.at(p.name);
          return v.is_string() ? v.get<std::string>() : v.dump();
        }
        case Placeholder::Prev:
          if (!scope.prev_output) invalid("${prev.output} has no previous step");
          return *scope.prev_output;
        case Placeholder::Step:
          if (scope.completed) {
            for (const auto& rec : *scope.completed) {
              if (rec.step_name == p.name) return rec.result.output;
            }
          }
          invalid(fmt::format("${{steps.{}.output}} is not available", p.name));
      }
      return {};
    });
  });
}

WorkflowResult run_workflow(const WorkflowSpec& spec, const json& inputs, Invoker& invoker) {
  if (!inputs.is_object()) invalid("workflow inputs must be a JSON object");
  for (const auto& key : required_inputs(spec)) {
    if (!inputs.contains(key)) invalid(fmt::format("missing workflow input '{}'", key));
  }
  validate_workflow(spec);

  WorkflowResult result;
  result.workflow_name = spec.name;
  for (const auto& step : spec.steps) {
    const std::string* prev = result.steps.empty() ? nullptr : &result.steps.back().result.output;
    StepRecord rec;
    rec.step_name = step.step_name;
    rec.function_name = step.function_name;
    rec.dispatched_parameters =
        substitute_placeholders(step.parameters, SubstitutionScope{inputs, prev, &result.steps});
    rec.result = invoker.invoke(step.function_name, rec.dispatched_parameters);
    spdlog::info("workflow {}: step {} ({}) -> {} on {}", spec.name, step.step_name,
                 step.function_name, to_string(rec.result.status), rec.result.node_id);
    if (!rec.result.ok()) {
      result.status = WorkflowStatus::Aborted;
      result.aborted_at = step.step_name;
      result.failure = std::move(rec);
      return result;
    }
    result.steps.push_back(std::move(rec));
  }
  if (!result.steps.empty()) result.final_output = result.steps.back().result.output;
  return result;
}

}  // namespace faasmesh
