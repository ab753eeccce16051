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

#include "faasmesh/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "faasmesh/catalog.hpp"
#include "faasmesh/errors.hpp"
#include "faasmesh/executor.hpp"
#include "faasmesh/gateway.hpp"
#include "faasmesh/planner.hpp"
#include "faasmesh/util.hpp"
#include "faasmesh/workflow.hpp"

namespace faasmesh::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Raised for usage problems detected after parsing (exit code 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Io {
  std::ostream& out;
  std::ostream& err;
  OutputFormat format;

  bool json_mode() const { return format == OutputFormat::Json; }
  void emit(const json& doc) const { out << doc.dump(2) << '\n'; }
};

void configure_logging(spdlog::level::level_enum level) {
  auto logger = spdlog::get("faasmesh");
  if (!logger) {
    logger = std::make_shared<spdlog::logger>(
        "faasmesh", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    spdlog::register_logger(logger);
  }
  spdlog::set_default_logger(logger);
  spdlog::set_level(level);
}

std::pair<std::string, int> split_listen(const std::string& listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw UsageError("--listen expects <addr:port>");
  try {
    return {listen.substr(0, colon), std::stoi(listen.substr(colon + 1))};
  } catch (const std::exception&) {
    throw UsageError(fmt::format("--listen: bad port in '{}'", listen));
  }
}

ClusterState load_cluster(const CliConfig& cfg) {
  std::error_code ec;
  if (fs::exists(cfg.topology_path, ec)) return load_topology(cfg.topology_path);
  return ClusterState::single_local_node();
}

json parse_data_argument(const std::string& data) {
  std::string text = data;
  if (!data.empty() && data.front() == '@') text = read_file(data.substr(1));
  json params;
  try {
    params = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(fmt::format("--data is not valid JSON: {}", e.what()));
  }
  if (!params.is_object()) throw UsageError("--data must be a JSON object");
  return params;
}

json result_to_json(const InvocationResult& r) {
  return {{"request_id", r.request_id},
          {"status", to_string(r.status)},
          {"output", r.is_text() || r.content_type == "application/json" ? r.output : std::string("<binary>")},
          {"content_type", r.content_type},
          {"node_id", r.node_id},
          {"cold_start", r.cold_start},
          {"duration_ms", r.duration_ms}};
}

// ---- env -------------------------------------------------------------------

void env_create(const CliConfig& cfg, const Io& io, const std::string& name, const std::string& image,
                const std::string& kind, const std::string& command) {
  Catalog catalog(cfg.catalog_path);
  EnvironmentSpec spec;
  spec.name = name;
  spec.image_ref = image;
  spec.runtime_kind = parse_runtime_kind(kind);
  spec.launch_command = split_whitespace(command);
  auto stored = catalog.create_environment(spec);
  if (io.json_mode()) {
    io.emit(json(stored));
  } else {
    io.out << stored.name << '\n';
  }
}

void env_list(const CliConfig& cfg, const Io& io) {
  Catalog catalog(cfg.catalog_path);
  const auto envs = catalog.list_environments();
  if (io.json_mode()) {
    io.emit(json(envs));
    return;
  }
  io.out << fmt::format("{:<24} {:<18} {}\n", "NAME", "KIND", "IMAGE");
  for (const auto& e : envs) {
    io.out << fmt::format("{:<24} {:<18} {}\n", e.name, to_string(e.runtime_kind), e.image_ref);
  }
}

void env_delete(const CliConfig& cfg, const Io& io, const std::string& name) {
  Catalog catalog(cfg.catalog_path);
  catalog.delete_environment(name);
  if (io.json_mode()) {
    io.emit({{"deleted", name}});
  } else {
    io.out << "deleted " << name << '\n';
  }
}

// ---- fn --------------------------------------------------------------------

void fn_create(const CliConfig& cfg, const Io& io, FunctionSpec spec, const std::string& method) {
  spec.http_method = parse_http_method(method);
  Catalog catalog(cfg.catalog_path);
  auto stored = catalog.create_function(spec);
  if (io.json_mode()) {
    io.emit(json(stored));
  } else {
    io.out << stored.name << '\n';
  }
}

void fn_list(const CliConfig& cfg, const Io& io) {
  Catalog catalog(cfg.catalog_path);
  const auto fns = catalog.list_functions();
  if (io.json_mode()) {
    io.emit(json(fns));
    return;
  }
  io.out << fmt::format("{:<20} {:<20} {:<24} {}\n", "NAME", "ENV", "ROUTE", "METHOD");
  for (const auto& f : fns) {
    io.out << fmt::format("{:<20} {:<20} {:<24} {}\n", f.name, f.env_name, f.url_route,
                          to_string(f.http_method));
  }
}

void fn_delete(const CliConfig& cfg, const Io& io, const std::string& name) {
  Catalog catalog(cfg.catalog_path);
  catalog.delete_function(name);
  if (io.json_mode()) {
    io.emit({{"deleted", name}});
  } else {
    io.out << "deleted " << name << '\n';
  }
}

int fn_invoke(const CliConfig& cfg, const Io& io, const std::string& name, const std::string& data) {
  const json params = parse_data_argument(data);

  std::string route = "/" + name + "/";
  std::string method = "POST";
  try {
    Catalog catalog(cfg.catalog_path);
    if (auto fn = catalog.find_function(name)) {
      route = fn->url_route;
      method = std::string(to_string(fn->http_method));
    }
  } catch (const Error&) {
    // An unreadable local catalog only costs us the route lookup.
  }

  std::string base;
  if (const char* env = std::getenv("FAAS_GATEWAY_URL"); env && *env) {
    base = env;
  } else {
    base = "http://" + cfg.listen;
  }
  while (!base.empty() && base.back() == '/') base.pop_back();

  httplib::Client client(base);
  client.set_read_timeout(std::chrono::seconds(600));
  const httplib::Headers headers;
  auto res = method == "GET" ? client.Get(route, headers)
                             : client.Post(route, headers, params.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::IoError,
                fmt::format("cannot reach gateway at {}: {}", base, httplib::to_string(res.error())));
  }
  if (io.json_mode()) {
    io.emit({{"http_status", res->status},
             {"body", res->body},
             {"request_id", res->get_header_value("X-Faas-Request-Id")},
             {"node_id", res->get_header_value("X-Faas-Node")},
             {"cold_start", res->get_header_value("X-Faas-Cold-Start") == "true"}});
  } else if (res->status == 200) {
    io.out << res->body << '\n';
  }
  if (res->status != 200) {
    io.err << fmt::format("error: HTTP {}: {}\n", res->status, res->body);
    return kExitDomainError;
  }
  return kExitOk;
}

// ---- serve -----------------------------------------------------------------

int serve(const CliConfig& cfg, const Io& io, int queue_timeout_ms) {
  configure_logging(spdlog::level::info);
  const auto [host, port] = split_listen(cfg.listen);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::error_code ec;
  if (fs::exists(cfg.catalog_path, ec)) build_route_table(load_snapshot(cfg.catalog_path));
  Catalog catalog(cfg.catalog_path);
  Planner planner(load_cluster(cfg));
  ExecutorConfig ecfg;
  ecfg.data_root = cfg.data_root;
  ecfg.queue_timeout = std::chrono::milliseconds(queue_timeout_ms);
  Executor executor(catalog, ecfg);
  Gateway gateway(catalog, planner, executor);
  gateway.prewarm();
  const int bound = gateway.start(host, port);
  if (io.json_mode()) {
    io.emit({{"listening", fmt::format("{}:{}", host, bound)}});
  } else {
    io.out << fmt::format("serving on http://{}:{}", host, bound) << std::endl;
  }

  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("shutting down on signal {}", sig);
  gateway.stop();
  executor.shutdown();
  return kExitOk;
}

// ---- topology / data / plan --------------------------------------------------

void topology_load(const CliConfig& cfg, const Io& io, const fs::path& file) {
  const auto cluster = load_topology(file);
  std::error_code ec;
  if (!fs::equivalent(file, cfg.topology_path, ec)) save_topology(cfg.topology_path, cluster);
  if (io.json_mode()) {
    io.emit({{"topology", cfg.topology_path.string()},
             {"nodes", cluster.nodes.size()},
             {"links", cluster.links.size()},
             {"data_items", cluster.data_items.size()}});
  } else {
    io.out << fmt::format("loaded {}: {} nodes, {} links, {} data items\n", file.string(),
                          cluster.nodes.size(), cluster.links.size(), cluster.data_items.size());
  }
}

void data_add(const CliConfig& cfg, const Io& io, const std::string& id, std::uint64_t size,
              const std::string& nodes) {
  Planner planner(load_cluster(cfg));
  DataItem item{id, size, {}};
  std::stringstream ss(nodes);
  for (std::string n; std::getline(ss, n, ',');) {
    if (!n.empty()) item.replica_nodes.insert(n);
  }
  planner.register_data(item);
  save_topology(cfg.topology_path, planner.snapshot());
  if (io.json_mode()) {
    io.emit({{"data_id", id}, {"size_bytes", size}, {"replica_nodes", item.replica_nodes}});
  } else {
    io.out << fmt::format("registered {} ({} bytes) on {}\n", id, size, fmt::join(item.replica_nodes, ","));
  }
}

int plan_explain(const CliConfig& cfg, const Io& io, const std::string& fn_name, const std::string& data) {
  const json params = parse_data_argument(data);
  Catalog catalog(cfg.catalog_path);
  catalog.get_function(fn_name);
  const auto cluster = load_cluster(cfg);
  const auto refs = extract_data_refs(params);
  const auto estimates = explain(refs, cluster, cluster.weights);
  std::optional<PlacementDecision> chosen;
  std::string why;
  try {
    chosen = choose_node(refs, cluster, cluster.weights);
  } catch (const Error& e) {
    why = e.what();
  }

  if (io.json_mode()) {
    json rows = json::array();
    for (const auto& e : estimates) {
      json transfers = json::array();
      for (const auto& t : e.transfers) {
        transfers.push_back({{"data_id", t.data_id}, {"source_node", t.source_node}, {"bytes", t.bytes}});
      }
      rows.push_back({{"node_id", e.node_id},
                      {"feasible", e.feasible},
                      {"reason", e.infeasible_reason},
                      {"transfer_cost", e.breakdown.transfer_cost},
                      {"latency_cost", e.breakdown.latency_cost},
                      {"compute_cost", e.breakdown.compute_cost},
                      {"total_cost", e.breakdown.total()},
                      {"transfers", transfers}});
    }
    io.emit({{"function", fn_name},
             {"data_refs", refs},
             {"nodes", rows},
             {"chosen", chosen ? json(chosen->node_id) : json(nullptr)}});
  } else {
    io.out << fmt::format("{:<16} {:>14} {:>14} {:>14} {:>14}  {}\n", "NODE", "TRANSFER", "LATENCY",
                          "COMPUTE", "TOTAL", "NOTE");
    for (const auto& e : estimates) {
      if (!e.feasible) {
        io.out << fmt::format("{:<16} {:>14} {:>14} {:>14} {:>14}  infeasible: {}\n", e.node_id, "-",
                              "-", "-", "-", e.infeasible_reason);
        continue;
      }
      io.out << fmt::format("{:<16} {:>14.6g} {:>14.6g} {:>14.6g} {:>14.6g}  {}\n", e.node_id,
                            e.breakdown.transfer_cost, e.breakdown.latency_cost,
                            e.breakdown.compute_cost, e.breakdown.total(),
                            chosen && chosen->node_id == e.node_id ? "<- chosen" : "");
    }
  }
  if (!chosen) {
    io.err << "error: " << why << '\n';
    return kExitDomainError;
  }
  return kExitOk;
}

// ---- workflow ----------------------------------------------------------------

int workflow_run(const CliConfig& cfg, const Io& io, const fs::path& file,
                 const std::vector<std::string>& input_pairs) {
  json inputs = json::object();
  for (const auto& kv : input_pairs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError(fmt::format("--input expects key=value, got '{}'", kv));
    inputs[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  Catalog catalog(cfg.catalog_path);
  const auto spec = parse_workflow(file, &catalog);
  Planner planner(load_cluster(cfg));
  ExecutorConfig ecfg;
  ecfg.data_root = cfg.data_root;
  ecfg.reap_interval = std::chrono::milliseconds(0);
  Executor executor(catalog, ecfg);
  Gateway gateway(catalog, planner, executor, GatewayConfig{.reload_catalog = false});
  const auto result = run_workflow(spec, inputs, gateway);

  if (io.json_mode()) {
    json steps = json::array();
    for (const auto& s : result.steps) {
      steps.push_back({{"step_name", s.step_name}, {"function_name", s.function_name},
                       {"parameters", s.dispatched_parameters}, {"result", result_to_json(s.result)}});
    }
    json doc = {{"workflow", result.workflow_name},
                {"status", result.completed() ? "completed" : "aborted"},
                {"steps", steps},
                {"final_output", result.final_output}};
    if (result.failure) {
      doc["aborted_at"] = result.aborted_at;
      doc["failure"] = result_to_json(result.failure->result);
    }
    io.emit(doc);
  } else {
    for (const auto& s : result.steps) {
      io.out << fmt::format("step {:<12} fn={:<16} node={:<10} cold={} duration_ms={:.1f} output={}\n",
                            s.step_name, s.function_name, s.result.node_id, s.result.cold_start,
                            s.result.duration_ms, s.result.output);
    }
    if (result.completed()) {
      io.out << fmt::format("completed {}: {}\n", result.workflow_name, result.final_output);
    }
  }
  if (!result.completed()) {
    io.err << fmt::format("error: StepFailed: workflow aborted at step '{}': {}\n", result.aborted_at,
                          result.failure ? result.failure->result.output : std::string{});
    return kExitDomainError;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging(spdlog::level::warn);

  CLI::App app{"faasctl - function-as-a-service control for scientific pipelines", "faasctl"};
  app.require_subcommand(1);
  app.fallthrough();

  CliConfig cfg;
  std::string output = "text";
  app.add_option("--catalog", cfg.catalog_path, "Catalog file")->capture_default_str();
  app.add_option("--topology", cfg.topology_path, "Cluster topology file")->capture_default_str();
  app.add_option("--data-root", cfg.data_root, "Directory behind /data/")->capture_default_str();
  app.add_option("--listen", cfg.listen, "Gateway address")->capture_default_str();
  app.add_option("--output", output, "Output format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();

  // Each subcommand stores its action here and runs it after parsing.
  std::function<int(const Io&)> action;

  auto* env = app.add_subcommand("env", "Manage environments")->require_subcommand(1);
  {
    auto* create = env->add_subcommand("create", "Create an environment");
    auto name = std::make_shared<std::string>();
    auto image = std::make_shared<std::string>();
    auto kind = std::make_shared<std::string>("builtin-test");
    auto command = std::make_shared<std::string>();
    create->add_option("--name", *name)->required();
    create->add_option("--image", *image);
    create->add_option("--kind", *kind)->check(CLI::IsMember({"builtin-test", "external-process"}));
    create->add_option("--command", *command, "Launch template with {port} and {workdir}");
    create->callback([&, name, image, kind, command] {
      action = [&, name, image, kind, command](const Io& io) {
        env_create(cfg, io, *name, *image, *kind, *command);
        return kExitOk;
      };
    });
    env->add_subcommand("list", "List environments")->callback([&] {
      action = [&](const Io& io) {
        env_list(cfg, io);
        return kExitOk;
      };
    });
    auto* del = env->add_subcommand("delete", "Delete an environment");
    auto del_name = std::make_shared<std::string>();
    del->add_option("--name", *del_name)->required();
    del->callback([&, del_name] {
      action = [&, del_name](const Io& io) {
        env_delete(cfg, io, *del_name);
        return kExitOk;
      };
    });
  }

  auto* fn = app.add_subcommand("fn", "Manage and invoke functions")->require_subcommand(1);
  {
    auto* create = fn->add_subcommand("create", "Create a function");
    auto spec = std::make_shared<FunctionSpec>();
    auto method = std::make_shared<std::string>("POST");
    create->add_option("--name", spec->name)->required();
    create->add_option("--env", spec->env_name)->required();
    create->add_option("--code", spec->code_ref)->required();
    create->add_option("--method", *method)->capture_default_str();
    create->add_option("--url", spec->url_route)->required();
    create->add_option("--min-warm", spec->min_warm)->capture_default_str();
    create->add_option("--max-pool", spec->max_pool)->capture_default_str();
    create->add_option("--idle-timeout", spec->idle_timeout_s, "Seconds")->capture_default_str();
    create->add_option("--timeout", spec->timeout_s, "Seconds")->capture_default_str();
    create->callback([&, spec, method] {
      action = [&, spec, method](const Io& io) {
        fn_create(cfg, io, *spec, *method);
        return kExitOk;
      };
    });
    fn->add_subcommand("list", "List functions")->callback([&] {
      action = [&](const Io& io) {
        fn_list(cfg, io);
        return kExitOk;
      };
    });
    auto* del = fn->add_subcommand("delete", "Delete a function");
    auto del_name = std::make_shared<std::string>();
    del->add_option("--name", *del_name)->required();
    del->callback([&, del_name] {
      action = [&, del_name](const Io& io) {
        fn_delete(cfg, io, *del_name);
        return kExitOk;
      };
    });
    auto* invoke = fn->add_subcommand("invoke", "Invoke a function through the gateway");
    auto inv_name = std::make_shared<std::string>();
    auto inv_data = std::make_shared<std::string>("{}");
    invoke->add_option("--name", *inv_name)->required();
    invoke->add_option("--data", *inv_data, "JSON object or @file");
    invoke->callback([&, inv_name, inv_data] {
      action = [&, inv_name, inv_data](const Io& io) { return fn_invoke(cfg, io, *inv_name, *inv_data); };
    });
  }

  {
    auto* srv = app.add_subcommand("serve", "Run the gateway until interrupted");
    auto queue_ms = std::make_shared<int>(10'000);
    srv->add_option("--queue-timeout-ms", *queue_ms)->capture_default_str();
    srv->callback([&, queue_ms] {
      action = [&, queue_ms](const Io& io) { return serve(cfg, io, *queue_ms); };
    });
  }

  auto* topo = app.add_subcommand("topology", "Cluster topology")->require_subcommand(1);
  {
    auto* load = topo->add_subcommand("load", "Validate a topology file and make it current");
    auto file = std::make_shared<std::string>();
    load->add_option("file", *file)->required();
    load->callback([&, file] {
      action = [&, file](const Io& io) {
        topology_load(cfg, io, *file);
        return kExitOk;
      };
    });
  }

  auto* data = app.add_subcommand("data", "Data items")->require_subcommand(1);
  {
    auto* add = data->add_subcommand("add", "Register a data item and its replicas");
    auto id = std::make_shared<std::string>();
    auto size = std::make_shared<std::uint64_t>(0);
    auto nodes = std::make_shared<std::string>();
    add->add_option("--id", *id)->required();
    add->add_option("--size", *size, "Bytes")->required();
    add->add_option("--nodes", *nodes, "Comma-separated node ids")->required();
    add->callback([&, id, size, nodes] {
      action = [&, id, size, nodes](const Io& io) {
        data_add(cfg, io, *id, *size, *nodes);
        return kExitOk;
      };
    });
  }

  auto* plan = app.add_subcommand("plan", "Placement planning")->require_subcommand(1);
  {
    auto* ex = plan->add_subcommand("explain", "Show the cost of every node without executing");
    auto fn_name = std::make_shared<std::string>();
    auto pdata = std::make_shared<std::string>("{}");
    ex->add_option("--fn", *fn_name)->required();
    ex->add_option("--data", *pdata, "JSON object or @file");
    ex->callback([&, fn_name, pdata] {
      action = [&, fn_name, pdata](const Io& io) { return plan_explain(cfg, io, *fn_name, *pdata); };
    });
  }

  auto* wf = app.add_subcommand("workflow", "Workflows")->require_subcommand(1);
  {
    auto* runc = wf->add_subcommand("run", "Run a workflow file");
    auto file = std::make_shared<std::string>();
    auto inputs = std::make_shared<std::vector<std::string>>();
    runc->add_option("file", *file)->required();
    runc->add_option("--input", *inputs, "key=value");
    runc->callback([&, file, inputs] {
      action = [&, file, inputs](const Io& io) { return workflow_run(cfg, io, *file, *inputs); };
    });
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomainError;
  }

  cfg.output = output == "json" ? OutputFormat::Json : OutputFormat::Text;
  cfg.catalog_path = fs::absolute(cfg.catalog_path).lexically_normal();
  cfg.topology_path = fs::absolute(cfg.topology_path).lexically_normal();
  cfg.data_root = fs::absolute(cfg.data_root).lexically_normal();
  const Io io{out, err, cfg.output};

  auto fail = [&](int code, const std::string& message) {
    err << "error: " << message << '\n';
    if (io.json_mode()) io.emit({{"error", message}, {"exit_code", code}});
    return code;
  };

  try {
    return action ? action(io) : fail(kExitDomainError, "no command given");
  } catch (const Error& e) {
    return fail(e.is_environmental() ? kExitIoError : kExitDomainError, e.what());
  } catch (const UsageError& e) {
    return fail(kExitDomainError, e.what());
  } catch (const std::exception& e) {
    return fail(kExitIoError, e.what());
  }
}

}  // namespace faasmesh::cli
