#include "occhmm/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "occhmm/format.hpp"

namespace occhmm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + value +
                      "'");
  }
  return out;
}

bool parse_bool(const std::string& key, std::string value) {
  std::transform(value.begin(), value.end(), value.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (value == "true" || value == "1" || value == "yes" || value == "on") {
    return true;
  }
  if (value == "false" || value == "0" || value == "no" || value == "off") {
    return false;
  }
  throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

std::pair<double, double> parse_pair(const std::string& key,
                                     const std::string& value) {
  const auto parts = split(value, ',');
  if (parts.size() != 2) {
    throw ConfigError(key + ": expected two comma-separated numbers");
  }
  return {parse_double(key, parts[0]), parse_double(key, parts[1])};
}

// "camera:start:duration, ..."
std::vector<sim::OcclusionEvent> parse_occlusions(const std::string& key,
                                                  const std::string& value) {
  std::vector<sim::OcclusionEvent> out;
  for (const auto& item : split(value, ',')) {
    const auto f = split(item, ':');
    if (f.size() != 3) {
      throw ConfigError(key + ": expected camera:start:duration, got '" +
                        item + "'");
    }
    out.push_back({parse_uint(key, f[0]),
                   {parse_uint(key, f[1]), parse_uint(key, f[2])}});
  }
  return out;
}

// "start[:duration], ..."
std::vector<sim::Interval> parse_changes(const std::string& key,
                                         const std::string& value) {
  std::vector<sim::Interval> out;
  for (const auto& item : split(value, ',')) {
    const auto f = split(item, ':');
    if (f.empty() || f.size() > 2) {
      throw ConfigError(key + ": expected start[:duration], got '" + item +
                        "'");
    }
    out.push_back({parse_uint(key, f[0]),
                   f.size() == 2 ? parse_uint(key, f[1]) : 1});
  }
  return out;
}

std::string pair_text(const std::pair<double, double>& p) {
  return format_double(p.first) + ", " + format_double(p.second);
}

using Setter = std::function<void(RunConfig&, const std::string& key,
                                  const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto num = [](double RunConfig::*field) {
      return [field](RunConfig& c, const std::string& k, const std::string& v) {
        c.*field = parse_double(k, v);
      };
    };
    t["format_version"] = [](RunConfig&, const std::string& k,
                             const std::string& v) {
      if (parse_uint(k, v) != static_cast<std::uint64_t>(kFormatVersion)) {
        throw ConfigError("unsupported format_version " + v);
      }
    };
    t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.seed = parse_uint(k, v);
    };
    t["n_cameras"] = [](RunConfig& c, const std::string& k,
                        const std::string& v) {
      c.n_cameras = parse_uint(k, v);
    };

    t["model.mu"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.emission.mu = parse_double(k, v);
    };
    t["model.m_max"] = [](RunConfig& c, const std::string& k,
                          const std::string& v) {
      c.emission.m_max = parse_double(k, v);
    };
    t["model.s_stay"] = [](RunConfig& c, const std::string& k,
                           const std::string& v) { c.s_stay = parse_pair(k, v); };
    t["model.o_stay"] = [](RunConfig& c, const std::string& k,
                           const std::string& v) { c.o_stay = parse_pair(k, v); };
    t["model.prior_normal"] = num(&RunConfig::prior_normal);
    t["model.calibrate"] = [](RunConfig& c, const std::string& k,
                              const std::string& v) {
      c.calibration.enabled = parse_bool(k, v);
    };
    t["model.calibration_window"] = [](RunConfig& c, const std::string& k,
                                       const std::string& v) {
      c.calibration.window = parse_uint(k, v);
    };
    t["model.calibration_min_separation"] = [](RunConfig& c,
                                               const std::string& k,
                                               const std::string& v) {
      c.calibration.min_separation = parse_double(k, v);
    };

    t["subspace.rank_cap"] = [](RunConfig& c, const std::string& k,
                                const std::string& v) {
      c.subspace.rank_cap = static_cast<Eigen::Index>(parse_uint(k, v));
    };
    t["subspace.forgetting"] = [](RunConfig& c, const std::string& k,
                                  const std::string& v) {
      c.subspace.forgetting = parse_double(k, v);
    };
    t["subspace.init_window"] = [](RunConfig& c, const std::string& k,
                                   const std::string& v) {
      c.subspace.init_window = parse_uint(k, v);
    };
    t["subspace.init_jitter"] = [](RunConfig& c, const std::string& k,
                                   const std::string& v) {
      c.subspace.init_jitter = parse_double(k, v);
    };
    t["subspace.mode"] = [](RunConfig& c, const std::string& k,
                            const std::string& v) {
      if (v == "incremental") c.subspace.mode = subspace::UpdateMode::kIncremental;
      else if (v == "window") c.subspace.mode = subspace::UpdateMode::kWindow;
      else throw ConfigError(k + ": expected incremental or window, got '" + v + "'");
    };
    t["subspace.window"] = [](RunConfig& c, const std::string& k,
                              const std::string& v) {
      c.subspace.window = parse_uint(k, v);
    };
    t["subspace.gate_threshold"] = [](RunConfig& c, const std::string& k,
                                      const std::string& v) {
      c.subspace.gate_threshold = parse_double(k, v);
    };

    t["tracker.num_features"] = [](RunConfig& c, const std::string& k,
                                   const std::string& v) {
      c.tracker.num_features = parse_uint(k, v);
    };
    t["tracker.search_radius"] = [](RunConfig& c, const std::string& k,
                                    const std::string& v) {
      c.tracker.search_radius = static_cast<int>(parse_uint(k, v));
    };
    t["tracker.feature_seed"] = [](RunConfig& c, const std::string& k,
                                   const std::string& v) {
      c.tracker.feature_seed = parse_uint(k, v);
    };

    t["control.alarm_threshold"] = [](RunConfig& c, const std::string& k,
                                      const std::string& v) {
      c.control.alarm_threshold = parse_double(k, v);
    };
    t["control.occlusion_threshold"] = [](RunConfig& c, const std::string& k,
                                          const std::string& v) {
      c.control.occlusion_threshold = parse_double(k, v);
    };
    t["control.lambda_normal"] = [](RunConfig& c, const std::string& k,
                                    const std::string& v) {
      c.control.lambda_normal = parse_double(k, v);
    };
    t["control.lambda_frozen"] = [](RunConfig& c, const std::string& k,
                                    const std::string& v) {
      c.control.lambda_frozen = parse_double(k, v);
    };
    t["control.freeze_on_change"] = [](RunConfig& c, const std::string& k,
                                       const std::string& v) {
      c.control.freeze_on_change = parse_bool(k, v);
    };
    t["control.alarm_debounce"] = [](RunConfig& c, const std::string& k,
                                     const std::string& v) {
      c.control.alarm_debounce = parse_uint(k, v);
    };
    t["control.release_threshold"] = [](RunConfig& c, const std::string& k,
                                        const std::string& v) {
      if (v == "none") c.control.release_threshold.reset();
      else c.control.release_threshold = parse_double(k, v);
    };

    t["scenario.mode"] = [](RunConfig& c, const std::string& k,
                            const std::string& v) {
      if (v == "patch") c.scenario.mode = sim::Mode::kPatch;
      else if (v == "direct_z") c.scenario.mode = sim::Mode::kDirectZ;
      else throw ConfigError(k + ": expected patch or direct_z, got '" + v + "'");
    };
    t["scenario.n_frames"] = [](RunConfig& c, const std::string& k,
                                const std::string& v) {
      c.scenario.n_frames = parse_uint(k, v);
    };
    t["scenario.patch_height"] = [](RunConfig& c, const std::string& k,
                                    const std::string& v) {
      c.scenario.patch_height = static_cast<int>(parse_uint(k, v));
    };
    t["scenario.patch_width"] = [](RunConfig& c, const std::string& k,
                                   const std::string& v) {
      c.scenario.patch_width = static_cast<int>(parse_uint(k, v));
    };
    t["scenario.latent_rank"] = [](RunConfig& c, const std::string& k,
                                   const std::string& v) {
      c.scenario.latent_rank = parse_uint(k, v);
    };
    t["scenario.noise_sigma"] = [](RunConfig& c, const std::string& k,
                                   const std::string& v) {
      c.scenario.noise_sigma = parse_double(k, v);
    };
    t["scenario.occlusions"] = [](RunConfig& c, const std::string& k,
                                  const std::string& v) {
      c.scenario.occlusions = parse_occlusions(k, v);
    };
    t["scenario.changes"] = [](RunConfig& c, const std::string& k,
                               const std::string& v) {
      c.scenario.changes = parse_changes(k, v);
    };
    t["scenario.sample_hidden"] = [](RunConfig& c, const std::string& k,
                                     const std::string& v) {
      c.scenario.sample_hidden = parse_bool(k, v);
    };
    t["scenario.walk_step"] = [](RunConfig& c, const std::string& k,
                                 const std::string& v) {
      c.scenario.walk_step = parse_double(k, v);
    };
    t["scenario.latent_bound"] = [](RunConfig& c, const std::string& k,
                                    const std::string& v) {
      c.scenario.latent_bound = parse_double(k, v);
    };
    t["scenario.loading_scale"] = [](RunConfig& c, const std::string& k,
                                     const std::string& v) {
      c.scenario.loading_scale = parse_double(k, v);
    };
    t["scenario.frame_width"] = [](RunConfig& c, const std::string& k,
                                   const std::string& v) {
      c.scenario.frame_width = static_cast<int>(parse_uint(k, v));
    };
    t["scenario.frame_height"] = [](RunConfig& c, const std::string& k,
                                    const std::string& v) {
      c.scenario.frame_height = static_cast<int>(parse_uint(k, v));
    };
    t["scenario.occluder_speed"] = [](RunConfig& c, const std::string& k,
                                      const std::string& v) {
      c.scenario.occluder_speed = static_cast<int>(parse_uint(k, v));
    };
    t["scenario.target_jitter"] = [](RunConfig& c, const std::string& k,
                                     const std::string& v) {
      c.scenario.target_jitter = parse_double(k, v);
    };

    t["io.stream"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.stream_path = v;
    };
    t["io.out"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.out_path = v;
    };
    t["io.truth"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.truth_path = v;
    };
    return t;
  }();
  return table;
}

void check_unit(const std::string& key, double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError(key + " must be in [0, 1], got " + format_double(v));
  }
}

}  // namespace

ModelParams RunConfig::model_params() const {
  ModelParams p;
  p.emission = emission;
  p.transitions.s_chain = sticky_chain(s_stay.first, s_stay.second);
  p.transitions.o_chains.assign(n_cameras,
                                sticky_chain(o_stay.first, o_stay.second));
  for (const auto& [camera, stay] : o_stay_per_camera) {
    if (camera < n_cameras) {
      p.transitions.o_chains[camera] = sticky_chain(stay.first, stay.second);
    }
  }
  p.transitions.prior = BeliefState::mostly_normal(n_cameras, prior_normal);
  return p;
}

sim::ScenarioConfig RunConfig::resolved_scenario() const {
  sim::ScenarioConfig s = scenario;
  s.seed = seed;
  s.n_cameras = n_cameras;
  s.model_params = model_params();
  return s;
}

void RunConfig::validate() const {
  try {
    if (n_cameras < 1 || n_cameras > kMaxCameras) {
      throw ConfigError("n_cameras must be in [1, 16]");
    }
    for (const auto& [camera, stay] : o_stay_per_camera) {
      if (camera >= n_cameras) {
        throw ConfigError("model.o_stay." + std::to_string(camera) +
                          " refers to a camera that does not exist");
      }
    }
    check_unit("model.s_stay", s_stay.first);
    check_unit("model.s_stay", s_stay.second);
    check_unit("model.o_stay", o_stay.first);
    check_unit("model.o_stay", o_stay.second);
    check_unit("model.prior_normal", prior_normal);
    model_params().validate();
    if (calibration.enabled && calibration.window < 1) {
      throw ConfigError("model.calibration_window must be >= 1");
    }
    if (!(calibration.min_separation >= 0.0)) {
      throw ConfigError("model.calibration_min_separation must be >= 0");
    }
    if (subspace.rank_cap < 0) throw ConfigError("subspace.rank_cap must be >= 0");
    if (!(subspace.forgetting > 0.0 && subspace.forgetting <= 1.0)) {
      throw ConfigError("subspace.forgetting must be in (0, 1]");
    }
    if (subspace.init_window < 2) {
      throw ConfigError("subspace.init_window must be >= 2");
    }
    if (subspace.mode == subspace::UpdateMode::kWindow &&
        subspace.window < subspace.init_window) {
      throw ConfigError("subspace.window must be >= subspace.init_window");
    }
    check_unit("subspace.gate_threshold", subspace.gate_threshold);
    if (tracker.num_features < 1) {
      throw ConfigError("tracker.num_features must be >= 1");
    }
    control.validate();
    resolved_scenario().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

std::vector<std::string> RunConfig::warnings() const {
  return emission.warnings();
}

RunConfig RunConfig::preset(const std::string& name, std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  if (name == "paper-analog") {
    c.scenario = sim::paper_analog_preset();
    c.n_cameras = c.scenario.n_cameras;
    c.calibration.enabled = true;
  } else if (name == "detection") {
    c.scenario = sim::detection_preset(c.seed);
    c.n_cameras = c.scenario.n_cameras;
    c.emission = {1.0, 20.0};
    c.s_stay = {0.95, 0.95};
    c.o_stay = {0.95, 0.95};
  } else if (name == "drift") {
    c.scenario = sim::drift_preset(c.seed);
    c.n_cameras = c.scenario.n_cameras;
    c.calibration.enabled = true;
    c.calibration.window = 25;
  } else {
    throw ConfigError("unknown preset '" + name +
                      "' (expected paper-analog, detection or drift)");
  }
  return c;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(
    const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    std::string body = trim(comment == std::string::npos
                                ? std::string_view(line)
                                : std::string_view(line).substr(0, comment));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') {
        throw ConfigError("line " + std::to_string(lineno) +
                          ": unterminated section header");
      }
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    }
    if (!section.empty()) key = section + "." + key;
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

RunConfig apply_config_text(const std::string& text, RunConfig base) {
  const auto kv = parse_key_values(text);
  std::uint64_t seed = base.seed;
  for (const auto& [key, value] : kv) {
    if (key == "seed") seed = parse_uint(key, value);
  }
  for (const auto& [key, value] : kv) {
    if (key == "preset") base = RunConfig::preset(value, seed);
  }
  std::vector<std::string> unknown;
  const auto& table = setters();
  for (const auto& [key, value] : kv) {
    if (key == "preset") continue;
    if (auto it = table.find(key); it != table.end()) {
      it->second(base, key, value);
      continue;
    }
    constexpr std::string_view kPerCamera = "model.o_stay.";
    if (key.starts_with(kPerCamera)) {
      const std::string idx = key.substr(kPerCamera.size());
      base.o_stay_per_camera[parse_uint(key, idx)] = parse_pair(key, value);
      continue;
    }
    unknown.push_back(key);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown configuration keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  return base;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return apply_config_text(ss.str(), std::move(base));
}

std::optional<std::filesystem::path> resolve_config_path(
    const std::optional<std::string>& explicit_path) {
  if (explicit_path && !explicit_path->empty()) return *explicit_path;
  if (const char* env = std::getenv(kConfigEnvVar); env && *env) {
    return std::filesystem::path(env);
  }
  return std::nullopt;
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream o;
  o << "format_version = " << kFormatVersion << '\n'
    << "seed = " << c.seed << '\n'
    << "n_cameras = " << c.n_cameras << "\n\n"
    << "[model]\n"
    << "mu = " << format_double(c.emission.mu) << '\n'
    << "m_max = " << format_double(c.emission.m_max) << '\n'
    << "s_stay = " << pair_text(c.s_stay) << '\n'
    << "o_stay = " << pair_text(c.o_stay) << '\n';
  for (const auto& [camera, stay] : c.o_stay_per_camera) {
    o << "o_stay." << camera << " = " << pair_text(stay) << '\n';
  }
  o << "prior_normal = " << format_double(c.prior_normal) << '\n'
    << "calibrate = " << (c.calibration.enabled ? "true" : "false") << '\n'
    << "calibration_window = " << c.calibration.window << '\n'
    << "calibration_min_separation = "
    << format_double(c.calibration.min_separation) << "\n\n"
    << "[subspace]\n"
    << "rank_cap = " << c.subspace.rank_cap << '\n'
    << "forgetting = " << format_double(c.subspace.forgetting) << '\n'
    << "init_window = " << c.subspace.init_window << '\n'
    << "init_jitter = " << format_double(c.subspace.init_jitter) << '\n'
    << "mode = "
    << (c.subspace.mode == subspace::UpdateMode::kWindow ? "window"
                                                         : "incremental")
    << '\n'
    << "window = " << c.subspace.window << '\n'
    << "gate_threshold = " << format_double(c.subspace.gate_threshold)
    << "\n\n"
    << "[tracker]\n"
    << "num_features = " << c.tracker.num_features << '\n'
    << "search_radius = " << c.tracker.search_radius << '\n'
    << "feature_seed = " << c.tracker.feature_seed << "\n\n"
    << "[control]\n"
    << "alarm_threshold = " << format_double(c.control.alarm_threshold) << '\n'
    << "occlusion_threshold = "
    << format_double(c.control.occlusion_threshold) << '\n'
    << "lambda_normal = " << format_double(c.control.lambda_normal) << '\n'
    << "lambda_frozen = " << format_double(c.control.lambda_frozen) << '\n'
    << "freeze_on_change = " << (c.control.freeze_on_change ? "true" : "false")
    << '\n'
    << "alarm_debounce = " << c.control.alarm_debounce << '\n'
    << "release_threshold = "
    << (c.control.release_threshold
            ? format_double(*c.control.release_threshold)
            : std::string("none"))
    << "\n\n";

  const auto& s = c.scenario;
  o << "[scenario]\n"
    << "mode = " << (s.mode == sim::Mode::kDirectZ ? "direct_z" : "patch")
    << '\n'
    << "n_frames = " << s.n_frames << '\n'
    << "patch_height = " << s.patch_height << '\n'
    << "patch_width = " << s.patch_width << '\n'
    << "latent_rank = " << s.latent_rank << '\n'
    << "noise_sigma = " << format_double(s.noise_sigma) << '\n'
    << "occlusions =";
  for (std::size_t i = 0; i < s.occlusions.size(); ++i) {
    const auto& e = s.occlusions[i];
    o << (i ? ", " : " ") << e.camera << ':' << e.span.start << ':'
      << e.span.duration;
  }
  o << "\nchanges =";
  for (std::size_t i = 0; i < s.changes.size(); ++i) {
    o << (i ? ", " : " ") << s.changes[i].start << ':'
      << s.changes[i].duration;
  }
  o << "\nsample_hidden = " << (s.sample_hidden ? "true" : "false") << '\n'
    << "walk_step = " << format_double(s.walk_step) << '\n'
    << "latent_bound = " << format_double(s.latent_bound) << '\n'
    << "loading_scale = " << format_double(s.loading_scale) << '\n'
    << "frame_width = " << s.frame_width << '\n'
    << "frame_height = " << s.frame_height << '\n'
    << "occluder_speed = " << s.occluder_speed << '\n'
    << "target_jitter = " << format_double(s.target_jitter) << '\n';
  return o.str();
}

}  // namespace occhmm
