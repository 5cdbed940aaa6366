#include "occhmm/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "occhmm/config.hpp"
#include "occhmm/diagnostics.hpp"
#include "occhmm/evaluation.hpp"
#include "occhmm/format.hpp"
#include "occhmm/oracle.hpp"
#include "occhmm/pipeline.hpp"
#include "occhmm/stream_io.hpp"

namespace occhmm::cli {

namespace {

struct Options {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::vector<std::string> set;
  std::optional<std::string> out;
  std::optional<std::string> truth;
  std::optional<std::string> stream;
  std::optional<std::string> beliefs;
  std::optional<std::string> posterior;
  std::optional<std::string> trace;
  std::optional<std::string> track;
  std::optional<double> fixed_lambda;
  bool controlled = false;
  std::optional<int> radius;
  bool dump = false;
};

// Raised for unreadable or unwritable files named on the command line.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig build_config(const Options& o) {
  RunConfig base;
  if (o.seed) base.seed = *o.seed;
  if (o.preset) base = RunConfig::preset(*o.preset, base.seed);

  RunConfig config = base;
  if (const auto path = resolve_config_path(o.config)) {
    config = load_config_file(*path, base);
  }
  if (!o.set.empty()) {
    std::string text;
    for (const auto& kv : o.set) text += kv + "\n";
    config = apply_config_text(text, config);
  }
  if (o.seed) config.seed = *o.seed;
  if (o.mode) {
    if (*o.mode == "patch") config.scenario.mode = sim::Mode::kPatch;
    else if (*o.mode == "direct_z") config.scenario.mode = sim::Mode::kDirectZ;
    else throw ConfigError("--mode must be patch or direct_z");
  }
  if (o.out) config.out_path = *o.out;
  if (o.truth) config.truth_path = *o.truth;
  if (o.stream) config.stream_path = *o.stream;
  config.validate();
  for (const auto& w : config.warnings()) warn(w);
  return config;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

// Writes through `fn` to `path`, or to `fallback` when path is empty.
template <typename Fn>
void write_to(const std::string& path, std::ostream& fallback, Fn fn) {
  if (path.empty() || path == "-") {
    fn(fallback);
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  fn(os);
  if (!os) throw IoError("failed writing '" + path + "'");
}

std::string derived_truth_path(const std::string& out) {
  std::filesystem::path p(out);
  p.replace_extension();
  return p.string() + ".truth.csv";
}

io::Stream load_stream(const RunConfig& config) {
  if (config.stream_path.empty()) {
    throw ConfigError("no input stream (use --stream or io.stream)");
  }
  auto in = open_in(config.stream_path);
  return io::read_stream(in);
}

int cmd_simulate(const RunConfig& config, std::ostream& out) {
  const auto scenario = sim::generate(config.resolved_scenario());
  write_to(config.out_path, out,
           [&](std::ostream& os) { io::write_stream(os, scenario); });
  std::string truth_path = config.truth_path;
  if (truth_path.empty() && !config.out_path.empty() && config.out_path != "-") {
    truth_path = derived_truth_path(config.out_path);
  }
  if (!truth_path.empty()) {
    write_to(truth_path, out,
             [&](std::ostream& os) { io::write_truth_csv(os, scenario.truth); });
  }
  return kOk;
}

int cmd_filter(const RunConfig& config, const Options& o, std::ostream& out) {
  const auto stream = load_stream(config);
  const auto result = pipeline::filter_stream(stream, config);
  write_to(config.out_path, out, [&](std::ostream& os) {
    io::write_posterior_header(os, stream.n_cameras);
    for (const auto& row : result.rows) io::write_posterior_row(os, row);
  });
  if (o.beliefs) {
    write_to(*o.beliefs, out, [&](std::ostream& os) {
      os << "# format_version=" << kFormatVersion << '\n';
      write_belief_csv_header(os, stream.n_cameras);
      for (const auto& b : result.beliefs) write_belief_csv_row(os, b);
    });
  }
  return kOk;
}

int cmd_track(const RunConfig& config, const Options& o, std::ostream& out) {
  if (o.fixed_lambda && o.controlled) {
    throw ConfigError("--fixed-lambda and --controlled are exclusive");
  }
  const auto result = pipeline::track(config, o.fixed_lambda, o.radius);
  write_to(config.out_path, out, [&](std::ostream& os) {
    pipeline::write_track_header(os);
    for (const auto& row : result.rows) pipeline::write_track_row(os, row);
  });
  if (o.posterior) {
    write_to(*o.posterior, out, [&](std::ostream& os) {
      io::write_posterior_header(os, config.n_cameras);
      for (const auto& row : result.posterior) io::write_posterior_row(os, row);
    });
  }
  return kOk;
}

int cmd_eval(const RunConfig& config, const Options& o, std::ostream& out) {
  if (!o.trace) throw ConfigError("eval needs --trace");
  if (config.truth_path.empty()) throw ConfigError("eval needs --truth");
  std::vector<io::PosteriorRow> trace;
  {
    auto in = open_in(*o.trace);
    trace = io::read_posterior_csv(in);
  }
  sim::GroundTruth truth;
  {
    auto in = open_in(config.truth_path);
    truth = io::read_truth_csv(in);
  }
  auto report = eval::evaluate(trace, truth, config.control);
  if (o.track) {
    auto in = open_in(*o.track);
    report.final_iou = eval::final_iou(io::read_csv(in));
  }
  write_to(config.out_path, out,
           [&](std::ostream& os) { eval::write_report(os, report); });
  return kOk;
}

int cmd_oracle(const RunConfig& config, std::ostream& out) {
  const auto stream = load_stream(config);
  if (stream.mode != sim::Mode::kDirectZ) {
    throw io::StreamError(1, "oracle needs a direct_z stream");
  }
  if (stream.n_cameras != config.n_cameras) {
    throw ConfigError("stream has " + std::to_string(stream.n_cameras) +
                      " cameras but the configuration expects " +
                      std::to_string(config.n_cameras));
  }
  std::vector<std::vector<double>> z;
  for (const auto& f : stream.frames) z.push_back(f.z);
  const auto marg = oracle::brute_force_marginals(z, config.model_params());
  write_to(config.out_path, out, [&](std::ostream& os) {
    os << "# format_version=" << kFormatVersion << '\n' << "t,p_S";
    for (std::size_t n = 0; n < stream.n_cameras; ++n) os << ",p_O_" << n + 1;
    os << '\n';
    for (std::size_t i = 0; i < marg.size(); ++i) {
      os << stream.frames[i].t << ',' << format_double(marg[i].p_change);
      for (double p : marg[i].p_occlusion) os << ',' << format_double(p);
      os << '\n';
    }
  });
  return kOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "Configuration file");
  sub->add_option("--preset", o.preset,
                  "Starting configuration: paper-analog, detection or drift");
  sub->add_option("--seed", o.seed, "Random seed");
  sub->add_option("--set", o.set, "Extra key=value configuration entries");
  sub->add_option("--out", o.out, "Output file (default: standard output)");
  sub->add_flag("--dump-config", o.dump,
                "Print the effective configuration and exit");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  Options o;
  CLI::App app{"Multi-camera occlusion and appearance-change filter", "occhmm"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Write a synthetic stream");
  add_common(simulate, o);
  simulate->add_option("--mode", o.mode, "patch or direct_z");
  simulate->add_option("--truth", o.truth,
                       "Ground-truth CSV (default: derived from --out)");

  auto* filter = app.add_subcommand("filter", "Filter a stream");
  add_common(filter, o);
  filter->add_option("--stream", o.stream, "Input NDJSON stream");
  filter->add_option("--beliefs", o.beliefs, "Also write full beliefs here");

  auto* track = app.add_subcommand("track", "Track on a rendered scenario");
  add_common(track, o);
  track->add_option("--fixed-lambda", o.fixed_lambda,
                    "Learn at this fixed rate");
  track->add_flag("--controlled", o.controlled,
                  "Learning rate from the controller (default)");
  track->add_option("--radius", o.radius, "Search radius override");
  track->add_option("--posterior", o.posterior, "Also write the posterior trace");

  auto* evaluate = app.add_subcommand("eval", "Score a posterior trace");
  add_common(evaluate, o);
  evaluate->add_option("--trace", o.trace, "Posterior CSV");
  evaluate->add_option("--truth", o.truth, "Ground-truth CSV");
  evaluate->add_option("--track", o.track, "Track CSV for final IoU");

  auto* oracle_cmd = app.add_subcommand("oracle", "Exact marginals by enumeration");
  add_common(oracle_cmd, o);
  oracle_cmd->add_option("--stream", o.stream, "Input NDJSON stream");

  auto previous_sink = set_warning_sink(
      [&err](std::string_view msg) { err << "warning: " << msg << '\n'; });
  struct Restore {
    WarningSink sink;
    ~Restore() { set_warning_sink(std::move(sink)); }
  } restore{std::move(previous_sink)};

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    const RunConfig config = build_config(o);
    if (o.dump) {
      out << dump_config(config);
      return kOk;
    }
    if (simulate->parsed()) return cmd_simulate(config, out);
    if (filter->parsed()) return cmd_filter(config, o, out);
    if (track->parsed()) return cmd_track(config, o, out);
    if (evaluate->parsed()) return cmd_eval(config, o, out);
    return cmd_oracle(config, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const io::StreamError& e) {
    err << "stream error: " << e.what() << '\n';
    return kStreamError;
  } catch (const StepError& e) {
    err << "stream error: filter failed at t=" << e.t() << ": " << e.what()
        << '\n';
    return kStreamError;
  } catch (const oracle::SizeError& e) {
    err << "stream error: " << e.what() << '\n';
    return kStreamError;
  } catch (const eval::EvalError& e) {
    err << "evaluation error: " << e.what() << '\n';
    return kEvalError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace occhmm::cli
