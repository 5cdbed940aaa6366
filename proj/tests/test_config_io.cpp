#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "occhmm/config.hpp"
#include "occhmm/evaluation.hpp"
#include "occhmm/format.hpp"
#include "occhmm/pipeline.hpp"
#include "occhmm/stream_io.hpp"

using namespace occhmm;

TEST(Format, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5e-17, 0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.85), "0.85");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Config, SectionsAndDottedKeys) {
  const auto c = apply_config_text(R"(
seed = 12
n_cameras = 3   # trailing comment
[model]
mu = 1.5
s_stay = 0.9, 0.6
o_stay.2 = 0.8, 0.4
; another comment
[scenario]
occlusions = 0:10:5, 2:30:2
changes = 50, 70:4
)");
  EXPECT_EQ(c.seed, 12U);
  EXPECT_EQ(c.n_cameras, 3U);
  EXPECT_DOUBLE_EQ(c.emission.mu, 1.5);
  EXPECT_DOUBLE_EQ(c.s_stay.second, 0.6);
  EXPECT_DOUBLE_EQ(c.o_stay_per_camera.at(2).first, 0.8);
  ASSERT_EQ(c.scenario.occlusions.size(), 2U);
  EXPECT_EQ(c.scenario.occlusions[1].camera, 2U);
  EXPECT_EQ(c.scenario.changes[0], (sim::Interval{50, 1}));
  EXPECT_EQ(c.scenario.changes[1], (sim::Interval{70, 4}));

  const auto p = c.model_params();
  EXPECT_DOUBLE_EQ(p.transitions.o_chains[2][0][0], 0.8);
  EXPECT_DOUBLE_EQ(p.transitions.o_chains[0][0][0], 0.95);
}

TEST(Config, UnknownKeysListed) {
  try {
    apply_config_text("model.muu = 1\nfoo = 2\nseed = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("model.muu"), std::string::npos);
    EXPECT_NE(msg.find("foo"), std::string::npos);
  }
}

TEST(Config, BadValues) {
  // keys inside a section are prefixed by it
  EXPECT_THROW(apply_config_text("[model]\ncontrol.alarm_threshold = 0.8"),
               ConfigError);
  EXPECT_THROW(apply_config_text("model.mu = abc"), ConfigError);
  EXPECT_THROW(apply_config_text("format_version = 2"), ConfigError);
  EXPECT_THROW(apply_config_text("[model\nmu = 1"), ConfigError);
  EXPECT_THROW(apply_config_text("just text"), ConfigError);
  RunConfig c = apply_config_text("model.mu = -1");
  EXPECT_THROW(c.validate(), ConfigError);
  c = apply_config_text("scenario.occlusions = 9:1:1");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, DumpRoundTrip) {
  RunConfig c = RunConfig::preset("paper-analog", 5);
  c.o_stay_per_camera[1] = {0.7, 0.3};
  c.control.release_threshold = 0.25;
  const std::string text = dump_config(c);
  const RunConfig back = apply_config_text(text);
  EXPECT_EQ(dump_config(back), text);
}

TEST(Config, PresetKeyAppliedFirst) {
  const auto c = apply_config_text("model.mu = 2\npreset = detection\nseed = 7\n");
  EXPECT_DOUBLE_EQ(c.emission.mu, 2.0);
  EXPECT_EQ(c.scenario.mode, sim::Mode::kDirectZ);
  EXPECT_EQ(c.scenario.occlusions.at(0).camera, 7U % 4U);
  EXPECT_THROW(RunConfig::preset("nope"), ConfigError);
}

TEST(Config, EnvFallback) {
  ::setenv(kConfigEnvVar, "/tmp/from_env.cfg", 1);
  EXPECT_EQ(resolve_config_path(std::nullopt)->string(), "/tmp/from_env.cfg");
  EXPECT_EQ(resolve_config_path(std::string("x.cfg"))->string(), "x.cfg");
  ::unsetenv(kConfigEnvVar);
  EXPECT_FALSE(resolve_config_path(std::nullopt).has_value());
}

TEST(Stream, RoundTripIsExact) {
  sim::ScenarioConfig sc;
  sc.n_cameras = 2;
  sc.n_frames = 20;
  sc.occlusions = {{1, {5, 3}}};
  sc.model_params = ModelParams::defaults(2);
  for (auto mode : {sim::Mode::kPatch, sim::Mode::kDirectZ}) {
    sc.mode = mode;
    const auto s = sim::generate(sc);
    std::stringstream ss;
    io::write_stream(ss, s);
    const auto back = io::read_stream(ss);
    EXPECT_EQ(back.mode, mode);
    EXPECT_EQ(back.n_cameras, 2U);
    ASSERT_EQ(back.frames.size(), 20U);
    for (std::size_t t = 0; t < 20; ++t) {
      EXPECT_EQ(back.frames[t].t, t + 1);
      EXPECT_EQ(back.frames[t].z, s.frames[t].z);
      EXPECT_EQ(back.frames[t].patches, s.frames[t].patches);
      EXPECT_EQ(back.frames[t].truth_o, s.frames[t].truth_o);
    }
  }
}

TEST(Stream, MalformedRecordsReportLine) {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      io::read_stream(in);
    } catch (const io::StreamError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string ok =
      R"({"format_version":1,"t":1,"mode":"direct_z","cameras":[{"z":0.5},{"z":1}]})"
      "\n";
  EXPECT_EQ(line_of(ok + R"({"format_version":1,"t":2,"mode":"direct_z","cameras":[{"z":0.5},{}]})"), 2U);
  EXPECT_EQ(line_of(ok + "{not json\n"), 2U);
  EXPECT_EQ(line_of(ok + ok), 2U);  // t not increasing
  EXPECT_EQ(line_of(R"({"format_version":1,"t":2,"mode":"direct_z","cameras":[{"z":1}]})"), 1U);
  EXPECT_EQ(line_of(R"({"t":1,"mode":"direct_z","cameras":[{"z":1}]})"), 1U);
  EXPECT_EQ(line_of(R"({"format_version":1,"t":1,"mode":"direct_z","cameras":[{"z":-1}]})"), 1U);
  EXPECT_EQ(line_of(ok + "\n" + R"({"format_version":1,"t":3,"mode":"direct_z","cameras":[{"z":1}]})"), 3U);
  std::istringstream empty("");
  EXPECT_THROW(io::read_stream(empty), io::StreamError);
}

TEST(Csv, TruthAndPosteriorRoundTrip) {
  sim::GroundTruth gt;
  gt.s = {0, 1, 1};
  gt.o = {{1, 0, 0}, {0, 0, 1}};
  std::stringstream ss;
  io::write_truth_csv(ss, gt);
  EXPECT_EQ(ss.str().substr(0, 18), "# format_version=1");
  const auto back = io::read_truth_csv(ss);
  EXPECT_EQ(back.s, gt.s);
  EXPECT_EQ(back.o, gt.o);

  std::stringstream ps;
  io::write_posterior_header(ps, 2);
  io::PosteriorRow r{1, 0.25, {0.1, 0.9}, {0.85, 1.0}, true};
  io::write_posterior_row(ps, r);
  EXPECT_NE(ps.str().find("t,p_S,p_O_1,p_O_2,lambda_1,lambda_2,alarm\n"
                          "1,0.25,0.1,0.9,0.85,1,1\n"),
            std::string::npos);
  const auto rows = io::read_posterior_csv(ps);
  ASSERT_EQ(rows.size(), 1U);
  EXPECT_EQ(rows[0].p_occlusion, r.p_occlusion);
  EXPECT_EQ(rows[0].lambdas, r.lambdas);
  EXPECT_TRUE(rows[0].alarm);
}

namespace {

std::vector<io::PosteriorRow> perfect_trace(const sim::GroundTruth& gt) {
  std::vector<io::PosteriorRow> out;
  for (std::size_t t = 0; t < gt.n_frames(); ++t) {
    io::PosteriorRow r;
    r.t = t + 1;
    r.p_change = gt.s[t];
    for (std::size_t n = 0; n < gt.n_cameras(); ++n) {
      r.p_occlusion.push_back(gt.o[n][t]);
      r.lambdas.push_back(0.85);
    }
    r.alarm = gt.s[t] != 0;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST(Evaluation, PerfectPosterior) {
  sim::GroundTruth gt;
  gt.s.assign(100, 0);
  gt.o.assign(2, std::vector<std::uint8_t>(100, 0));
  for (std::size_t t = 40; t < 45; ++t) gt.s[t] = 1;
  for (std::size_t t = 10; t < 20; ++t) gt.o[1][t] = 1;
  const auto r = eval::evaluate(perfect_trace(gt), gt, {});
  ASSERT_EQ(r.events.size(), 2U);
  EXPECT_TRUE(r.events[0].is_change);
  EXPECT_EQ(r.events[0].span, (sim::Interval{41, 5}));
  EXPECT_TRUE(r.events[0].detected);
  EXPECT_EQ(r.events[0].delay, 0U);
  EXPECT_EQ(r.events[0].peak, 1.0);
  EXPECT_EQ(r.events[1].camera, 1U);
  EXPECT_EQ(r.events[1].delay, 0U);
  EXPECT_EQ(r.false_alarms, 0U);
  EXPECT_EQ(r.false_alarm_rate, 0.0);
}

TEST(Evaluation, HandCheckedReport) {
  sim::GroundTruth gt;
  gt.s = {0, 0, 0, 1, 1, 0, 0, 0, 0, 0};
  gt.o = {{0, 1, 1, 0, 0, 0, 0, 0, 0, 0}};
  std::vector<io::PosteriorRow> trace;
  const double ps[] = {0, 0, 0, 0.5, 0.95, 0.97, 0, 0, 0.99, 0};
  const double po[] = {0, 0.3, 0.8, 0, 0, 0, 0, 0, 0, 0};
  for (std::size_t t = 0; t < 10; ++t) {
    trace.push_back({t + 1, ps[t], {po[t]}, {0.85}, ps[t] > 0.9});
  }
  const auto r = eval::evaluate(trace, gt, {});
  std::ostringstream os;
  eval::write_report(os, r);
  EXPECT_EQ(os.str(),
            "format_version=1\n"
            "frames=10\n"
            "change_events=1\n"
            "occlusion_events=1\n"
            "change.1.start=4\n"
            "change.1.end=5\n"
            "change.1.detected=1\n"
            "change.1.delay=1\n"
            "change.1.peak=0.95\n"
            "occlusion.1.camera=1\n"
            "occlusion.1.start=2\n"
            "occlusion.1.end=3\n"
            "occlusion.1.detected=1\n"
            "occlusion.1.delay=1\n"
            "occlusion.1.peak=0.8\n"
            "false_alarms=1\n"
            "false_alarm_rate_per_1000=100\n");
}

TEST(Evaluation, NoEventsAndMismatch) {
  sim::GroundTruth gt;
  gt.s.assign(50, 0);
  gt.o.assign(1, std::vector<std::uint8_t>(50, 0));
  auto trace = perfect_trace(gt);
  trace[10].alarm = true;
  const auto r = eval::evaluate(trace, gt, {});
  EXPECT_TRUE(r.events.empty());
  EXPECT_EQ(r.false_alarms, 1U);
  EXPECT_DOUBLE_EQ(r.false_alarm_rate, 20.0);
  std::ostringstream os;
  eval::write_report(os, r);
  EXPECT_EQ(os.str().find("delay"), std::string::npos);

  trace.pop_back();
  EXPECT_THROW(eval::evaluate(trace, gt, {}), eval::EvalError);
}

TEST(Calibration, MeanAndSeparationFloor) {
  std::vector<double> r(1000);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = double(i + 1) / 1000.0;
  const auto e = pipeline::calibrate_emission(r, 10.0);
  EXPECT_NEAR(e.mu, 0.5005, 1e-12);
  EXPECT_DOUBLE_EQ(e.m_max, 10.0 * e.mu);
  const auto wide = pipeline::calibrate_emission(r, 1.0);
  EXPECT_DOUBLE_EQ(wide.m_max, 2.0 * 0.999);
  EXPECT_THROW(pipeline::calibrate_emission({}, 10.0), std::invalid_argument);
}

TEST(Pipeline, DirectStreamMatchesFilterRun) {
  RunConfig cfg = RunConfig::preset("detection", 3);
  const auto scenario = sim::generate(cfg.resolved_scenario());
  std::stringstream ss;
  io::write_stream(ss, scenario);
  const auto stream = io::read_stream(ss);
  const auto result = pipeline::filter_stream(stream, cfg);

  std::vector<ObservationVector> obs;
  for (const auto& f : scenario.frames) obs.push_back({f.z});
  const auto frames = run(obs, cfg.model_params());
  ASSERT_EQ(result.rows.size(), frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    EXPECT_EQ(result.rows[t].p_change, frames[t].marginals.p_change);
    EXPECT_EQ(result.rows[t].p_occlusion, frames[t].marginals.p_occlusion);
  }
}

TEST(Pipeline, PatchStreamDetectsPaperAnalogEvents) {
  const RunConfig cfg = RunConfig::preset("paper-analog");
  const auto scenario = sim::generate(cfg.resolved_scenario());
  std::stringstream ss;
  io::write_stream(ss, scenario);
  const auto result = pipeline::filter_stream(io::read_stream(ss), cfg);
  const auto report = eval::evaluate(result.rows, scenario.truth, cfg.control);
  for (const auto& e : report.events) {
    EXPECT_TRUE(e.detected);
    EXPECT_GT(e.peak, 0.9);
  }
  EXPECT_LE(report.false_alarm_rate, 1.0);
}

TEST(Pipeline, TrackZeroRadiusKeepsBoxes) {
  RunConfig cfg = RunConfig::preset("drift");
  cfg.scenario.n_frames = 20;
  cfg.scenario.occlusions.clear();
  const auto r = pipeline::track(cfg, 0.85, 0);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.box, r.rows[row.camera].box);
  }
  cfg.scenario.n_frames = 1;
  EXPECT_EQ(pipeline::track(cfg, std::nullopt).posterior.size(), 1U);
}
