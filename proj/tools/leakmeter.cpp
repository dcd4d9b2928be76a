// leakmeter: estimate secrecy leakage (channel capacity) of randomized
// protocols from traces, and compare against exact protocol oracles.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "leakmeter/channel.hpp"
#include "leakmeter/error.hpp"
#include "leakmeter/learn.hpp"
#include "leakmeter/oracle.hpp"
#include "leakmeter/simulate.hpp"
#include "leakmeter/sweep.hpp"

namespace {

using namespace leakmeter;

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kLearning = 4,
  kNotConverged = 5,
};

void configure_logging() {
  auto logger = spdlog::stderr_color_st("leakmeter");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::err);
  if (const char* level = std::getenv("LEAKMETER_LOG")) {
    const std::string v(level);
    if (v == "debug") {
      spdlog::set_level(spdlog::level::debug);
    } else if (v == "info") {
      spdlog::set_level(spdlog::level::info);
    } else if (v != "error") {
      spdlog::warn("ignoring LEAKMETER_LOG={} (expected error, info or debug)", v);
    }
  }
}

void print_capacity(const CapacityResult& r, bool as_json) {
  if (as_json) {
    nlohmann::ordered_json j;
    j["capacity_bits"] = r.capacity_bits;
    j["method"] = std::string(to_string(r.method));
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["upper_bound_bits"] = r.upper_bound_bits;
    j["input_distribution"] = {{"alphabet", r.input_distribution.alphabet()},
                               {"probs", r.input_distribution.probs()}};
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::cout << "capacity_bits: " << format_bits(r.capacity_bits) << "\n"
            << "method: " << to_string(r.method) << "\n"
            << "iterations: " << r.iterations << "\n"
            << "converged: " << (r.converged ? "true" : "false") << "\n"
            << "input_distribution:";
  for (std::size_t i = 0; i < r.input_distribution.size(); ++i) {
    std::cout << " " << r.input_distribution.alphabet()[i] << "=" << format_bits(r.input_distribution[i]);
  }
  std::cout << "\n";
}

void print_edges(const DependencyModel& m) {
  for (const auto& o : m.observable_vars) {
    std::cout << o << " <-";
    for (const auto& p : m.edges.at(o)) std::cout << " " << p;
    std::cout << "\n";
  }
  for (const auto& f : m.factors) {
    if (f.observables.size() > 1) std::cout << "joint factor: " << f.name() << "\n";
  }
}

struct LearnFlags {
  std::size_t max_degree = 0;
  double struct_tol = kDefaultStructureTolerance;
  std::string target = "mutual-information";
  double alpha = 0.0;
  bool independent_observables = false;
  double independence_tol = kDefaultIndependenceTolerance;

  void attach(CLI::App* cmd) {
    cmd->add_option("--max-degree", max_degree, "Largest parent set tried (default: number of secrets)");
    cmd->add_option("--struct-tol", struct_tol, "Relative tolerance of the edge test")->check(CLI::NonNegativeNumber);
    cmd->add_option("--structure-target", target, "Edge test target: mutual-information or entropy")
        ->check(CLI::IsMember({"mutual-information", "entropy"}));
    cmd->add_option("--alpha", alpha, "Add-alpha CPT smoothing")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--independent-observables", independent_observables,
                  "Always factorize observables given their parents");
    cmd->add_option("--independence-tol", independence_tol,
                    "Conditional MI (bits) above which observables share one CPT")
        ->check(CLI::NonNegativeNumber);
  }

  EstimateOptions options() const {
    EstimateOptions o;
    o.max_degree = max_degree;
    o.struct_tol = struct_tol;
    o.target = target == "entropy" ? StructureTarget::observable_entropy : StructureTarget::full_secret_information;
    o.fit.alpha = alpha;
    o.fit.merge_dependent_observables = !independent_observables;
    o.fit.independence_tol = independence_tol;
    return o;
  }
};

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"leakmeter: channel-capacity leakage estimation for randomized protocols"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate seeded protocol traces (CSV)");
  simulate->require_subcommand(1);
  DcConfig dc;
  CrowdsConfig crowds;
  std::string sim_out;
  auto* sim_dc = simulate->add_subcommand("dc", "Dining cryptographers");
  sim_dc->add_option("--k", dc.k, "Number of cryptographers (>= 3)");
  sim_dc->add_option("--bias", dc.bias, "Probability of heads")->check(CLI::Range(0.0, 1.0));
  sim_dc->add_option("--samples", dc.samples, "Records to emit");
  sim_dc->add_option("--seed", dc.seed, "PRNG seed");
  sim_dc->add_option("--out", sim_out, "Output CSV path")->required();
  auto* sim_crowds = simulate->add_subcommand("crowds", "Crowds anonymous routing");
  sim_crowds->add_option("--honest", crowds.honest, "Honest members (>= 2)");
  sim_crowds->add_option("--corrupt", crowds.corrupt, "Corrupt members (>= 1)");
  sim_crowds->add_option("--pf", crowds.pf, "Forwarding probability")->check(CLI::Range(0.0, 1.0));
  sim_crowds->add_option("--samples", crowds.samples, "Detected runs to emit");
  sim_crowds->add_option("--seed", crowds.seed, "PRNG seed");
  sim_crowds->add_option("--out", sim_out, "Output CSV path")->required();

  // learn
  auto* learn = app.add_subcommand("learn", "Learn the dependency model from traces");
  std::string learn_traces;
  std::string learn_out;
  LearnFlags learn_flags;
  learn->add_option("--traces", learn_traces, "Trace CSV")->required();
  learn->add_option("--out", learn_out, "Model JSON path")->required();
  learn_flags.attach(learn);

  // capacity
  auto* cap = app.add_subcommand("capacity", "Channel capacity from a model, traces or a channel");
  std::string cap_model;
  std::string cap_traces;
  std::string cap_channel;
  std::string cap_method = "auto";
  double ab_tol = kDefaultAbTolerance;
  std::size_t max_iter = kDefaultMaxIterations;
  bool cap_json = false;
  LearnFlags cap_flags;
  auto* opt_model = cap->add_option("--model", cap_model, "Model JSON");
  auto* opt_traces = cap->add_option("--traces", cap_traces, "Trace CSV");
  auto* opt_channel = cap->add_option("--channel", cap_channel, "Channel JSON");
  opt_model->excludes(opt_traces)->excludes(opt_channel);
  opt_traces->excludes(opt_channel);
  cap->add_option("--method", cap_method, "auto, symmetric or arimoto_blahut")
      ->check(CLI::IsMember({"auto", "symmetric", "arimoto_blahut"}));
  cap->add_option("--ab-tol", ab_tol, "Arimoto-Blahut capacity-delta stopping tolerance")->check(CLI::PositiveNumber);
  cap->add_option("--max-iter", max_iter, "Arimoto-Blahut iteration cap")->check(CLI::PositiveNumber);
  cap->add_flag("--json", cap_json, "Machine-readable output");
  cap_flags.attach(cap);

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Exact capacity of a protocol");
  oracle->require_subcommand(1);
  std::string dump_channel;
  bool oracle_json = false;
  std::size_t oracle_k = 3;
  double oracle_bias = 0.5;
  std::size_t oracle_honest = 10;
  std::size_t oracle_corrupt = 2;
  double oracle_pf = 0.8;
  auto* or_dc = oracle->add_subcommand("dc", "Dining cryptographers");
  or_dc->add_option("--k", oracle_k, "Number of cryptographers (>= 3)");
  or_dc->add_option("--bias", oracle_bias, "Probability of heads")->check(CLI::Range(0.0, 1.0));
  auto* or_crowds = oracle->add_subcommand("crowds", "Crowds anonymous routing");
  or_crowds->add_option("--honest", oracle_honest, "Honest members (>= 2)");
  or_crowds->add_option("--corrupt", oracle_corrupt, "Corrupt members (>= 1)");
  or_crowds->add_option("--pf", oracle_pf, "Forwarding probability")->check(CLI::Range(0.0, 1.0));
  for (auto* c : {or_dc, or_crowds}) {
    c->add_option("--dump-channel", dump_channel, "Write the exact channel as JSON");
    c->add_flag("--json", oracle_json, "Machine-readable output");
  }

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Estimated vs exact capacity over a parameter grid (CSV)");
  std::string sweep_protocol;
  std::string sweep_range;
  std::string sweep_out;
  SweepSpec spec;
  LearnFlags sweep_flags;
  sweep->add_option("protocol", sweep_protocol, "dc or crowds")->required()->check(CLI::IsMember({"dc", "crowds"}));
  sweep->add_option("--k", spec.k, "Cryptographers (dc)");
  sweep->add_option("--honest", spec.honest, "Honest members (crowds)");
  sweep->add_option("--corrupt", spec.corrupt, "Corrupt members (crowds)");
  sweep->add_option("--range", sweep_range, "start:stop:step over bias (dc) or pf (crowds)")->required();
  sweep->add_option("--samples", spec.samples, "Samples per grid point and seed");
  sweep->add_option("--seeds", spec.seeds, "Seeds, comma separated")->delimiter(',');
  sweep->add_option("--jobs", spec.jobs, "Concurrent grid points")->check(CLI::PositiveNumber);
  sweep->add_option("--ab-tol", spec.estimate.ab_tol, "Arimoto-Blahut tolerance")->check(CLI::PositiveNumber);
  sweep->add_option("--max-iter", spec.estimate.max_iter, "Arimoto-Blahut iteration cap")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sweep_out, "Output CSV path (default: stdout)");
  sweep_flags.attach(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (simulate->parsed()) {
      const TraceSet traces = sim_dc->parsed() ? simulate_dc(dc) : simulate_crowds(crowds);
      traces.save_csv(sim_out);
      std::cout << "wrote " << traces.size() << " records to " << sim_out << "\n";
      return kOk;
    }

    if (learn->parsed()) {
      const auto traces = TraceSet::load_csv(learn_traces);
      spdlog::info("loaded {} records from {}", traces.size(), learn_traces);
      const auto opts = learn_flags.options();
      const auto edges = learn_structure(traces, opts.max_degree, opts.struct_tol, opts.target);
      const auto model = fit_cpts(traces, edges, opts.fit);
      model.save_json(learn_out);
      print_edges(model);
      return kOk;
    }

    if (cap->parsed()) {
      const int given = static_cast<int>(!cap_model.empty()) + static_cast<int>(!cap_traces.empty()) +
                        static_cast<int>(!cap_channel.empty());
      if (given != 1) {
        std::cerr << "capacity: give exactly one of --model, --traces, --channel\n";
        return kUsage;
      }
      const auto method = *parse_capacity_method(cap_method);
      std::optional<CapacityResult> result;
      if (!cap_traces.empty()) {
        const auto traces = TraceSet::load_csv(cap_traces);
        auto opts = cap_flags.options();
        opts.ab_tol = ab_tol;
        opts.max_iter = max_iter;
        opts.method = method;
        auto estimate = estimate_capacity(traces, opts);
        spdlog::info("learned channel is {}x{}", estimate.channel.rows(), estimate.channel.cols());
        result.emplace(std::move(estimate.capacity));
      } else {
        const Channel channel = !cap_channel.empty() ? Channel::load_json(cap_channel)
                                                     : model_to_channel(DependencyModel::load_json(cap_model));
        result.emplace(capacity(channel, method, ab_tol, max_iter));
      }
      print_capacity(*result, cap_json);
      if (!result->converged) {
        std::cerr << "capacity: Arimoto-Blahut did not converge within " << max_iter << " iterations\n";
        return kNotConverged;
      }
      return kOk;
    }

    if (oracle->parsed()) {
      const Channel channel = or_dc->parsed() ? oracle_dc_channel(oracle_k, oracle_bias)
                                              : oracle_crowds_channel(oracle_honest, oracle_corrupt, oracle_pf);
      if (!dump_channel.empty()) channel.save_json(dump_channel);
      print_capacity(oracle_capacity(channel), oracle_json);
      return kOk;
    }

    if (sweep->parsed()) {
      spec.protocol = *parse_protocol(sweep_protocol);
      spec.range = ParameterRange::parse(sweep_range);
      const auto learn_opts = sweep_flags.options();
      spec.estimate.max_degree = learn_opts.max_degree;
      spec.estimate.struct_tol = learn_opts.struct_tol;
      spec.estimate.target = learn_opts.target;
      spec.estimate.fit = learn_opts.fit;
      const auto rows = run_sweep(spec);
      std::size_t failures = 0;
      for (const auto& r : rows) failures += r.error.empty() ? 0 : 1;
      spdlog::info("sweep finished: {} rows, {} with errors", rows.size(), failures);
      if (sweep_out.empty()) {
        write_sweep_csv(std::cout, rows);
      } else {
        std::ofstream out(sweep_out, std::ios::binary);
        if (!out) throw IoError("cannot open '" + sweep_out + "' for writing");
        write_sweep_csv(out, rows);
        if (!out) throw IoError("failed writing '" + sweep_out + "'");
        std::cout << "wrote " << rows.size() << " rows to " << sweep_out << "\n";
      }
      return kOk;
    }
  } catch (const StructureLearningError& e) {
    std::cerr << "learning failed: " << e.what() << "\n";
    return kLearning;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsage;
}
