#include "occhmm/stream_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "occhmm/config.hpp"
#include "occhmm/format.hpp"

namespace occhmm::io {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    if (s == "nan") return std::nan("");
    throw StreamError(line, "expected a number, got '" + s + "'");
  }
  return v;
}

std::size_t to_index(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw StreamError(line, "expected an integer, got '" + s + "'");
  }
  return v;
}

double json_real(const json& v, std::size_t line, const char* what) {
  if (!v.is_number()) {
    throw StreamError(line, std::string(what) + " must be a number");
  }
  const double d = v.get<double>();
  if (!std::isfinite(d)) {
    throw StreamError(line, std::string(what) + " must be finite");
  }
  return d;
}

void write_header_comment(std::ostream& os) {
  os << "# format_version=" << kFormatVersion << '\n';
}

}  // namespace

StreamError::StreamError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what),
      line_(line) {}

std::ptrdiff_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : it - header.begin();
}

std::string mode_name(sim::Mode mode) {
  return mode == sim::Mode::kDirectZ ? "direct_z" : "patch";
}

void write_record(std::ostream& os, const sim::FrameRecord& record,
                  sim::Mode mode) {
  // Built by hand so every real goes through format_double.
  os << "{\"format_version\":" << kFormatVersion << ",\"t\":" << record.t
     << ",\"mode\":\"" << mode_name(mode) << "\",\"cameras\":[";
  const std::size_t n = record.n_cameras();
  for (std::size_t c = 0; c < n; ++c) {
    if (c) os << ',';
    if (mode == sim::Mode::kDirectZ) {
      os << "{\"z\":" << format_double(record.z[c]) << '}';
    } else {
      os << "{\"patch\":[";
      const auto& p = record.patches[c];
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) os << ',';
        os << format_double(p[i]);
      }
      os << "]}";
    }
  }
  os << ']';
  if (record.truth_s) {
    os << ",\"truth\":{\"s\":" << int{*record.truth_s} << ",\"o\":[";
    for (std::size_t c = 0; c < record.truth_o.size(); ++c) {
      if (c) os << ',';
      os << int{record.truth_o[c]};
    }
    os << "]}";
  }
  os << "}\n";
}

void write_stream(std::ostream& os, const sim::Scenario& scenario) {
  for (const auto& rec : scenario.frames) write_record(os, rec, scenario.mode);
}

Stream read_stream(std::istream& is) {
  Stream out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t last_t = 0;
  bool first = true;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw StreamError(lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) throw StreamError(lineno, "record is not an object");

    if (!rec.contains("format_version") ||
        rec["format_version"] != kFormatVersion) {
      throw StreamError(lineno, "missing or unsupported format_version");
    }
    if (!rec.contains("t") || !rec["t"].is_number_unsigned()) {
      throw StreamError(lineno, "missing or invalid t");
    }
    const auto t = rec["t"].get<std::size_t>();
    if (first ? t != 1 : t <= last_t) {
      throw StreamError(lineno, first ? "t must start at 1"
                                      : "t must be strictly increasing");
    }

    if (!rec.contains("mode") || !rec["mode"].is_string()) {
      throw StreamError(lineno, "missing mode");
    }
    const std::string mode_text = rec["mode"].get<std::string>();
    sim::Mode mode;
    if (mode_text == "direct_z") mode = sim::Mode::kDirectZ;
    else if (mode_text == "patch") mode = sim::Mode::kPatch;
    else throw StreamError(lineno, "unknown mode '" + mode_text + "'");

    if (!rec.contains("cameras") || !rec["cameras"].is_array() ||
        rec["cameras"].empty()) {
      throw StreamError(lineno, "missing cameras array");
    }
    const auto& cams = rec["cameras"];
    if (first) {
      out.mode = mode;
      out.n_cameras = cams.size();
      if (out.n_cameras > kMaxCameras) {
        throw StreamError(lineno, "too many cameras");
      }
    } else {
      if (mode != out.mode) throw StreamError(lineno, "mode changed mid-stream");
      if (cams.size() != out.n_cameras) {
        throw StreamError(lineno, "camera count changed mid-stream");
      }
    }

    sim::FrameRecord fr;
    fr.t = t;
    for (std::size_t c = 0; c < cams.size(); ++c) {
      const auto& cam = cams[c];
      if (mode == sim::Mode::kDirectZ) {
        if (!cam.is_object() || !cam.contains("z")) {
          throw StreamError(lineno,
                            "camera " + std::to_string(c) + " is missing z");
        }
        const double z = json_real(cam["z"], lineno, "z");
        if (z < 0.0) throw StreamError(lineno, "z must be nonnegative");
        fr.z.push_back(z);
      } else {
        if (!cam.is_object() || !cam.contains("patch") ||
            !cam["patch"].is_array() || cam["patch"].empty()) {
          throw StreamError(lineno,
                            "camera " + std::to_string(c) + " is missing patch");
        }
        std::vector<double> patch;
        patch.reserve(cam["patch"].size());
        for (const auto& v : cam["patch"]) {
          patch.push_back(json_real(v, lineno, "patch value"));
        }
        if (out.patch_dim == 0) out.patch_dim = patch.size();
        if (patch.size() != out.patch_dim) {
          throw StreamError(lineno, "patch dimension changed mid-stream");
        }
        fr.patches.push_back(std::move(patch));
      }
    }

    if (rec.contains("truth")) {
      const auto& truth = rec["truth"];
      if (!truth.is_object() || !truth.contains("s") || !truth.contains("o") ||
          !truth["o"].is_array() || truth["o"].size() != out.n_cameras) {
        throw StreamError(lineno, "malformed truth");
      }
      fr.truth_s = truth["s"].get<int>() != 0;
      for (const auto& v : truth["o"]) {
        fr.truth_o.push_back(v.get<int>() != 0);
      }
    }

    out.frames.push_back(std::move(fr));
    last_t = t;
    first = false;
  }
  if (out.frames.empty()) throw StreamError(lineno, "stream is empty");
  return out;
}

void write_truth_csv(std::ostream& os, const sim::GroundTruth& truth) {
  write_header_comment(os);
  os << "t,s";
  for (std::size_t n = 0; n < truth.n_cameras(); ++n) os << ",o_" << n + 1;
  os << '\n';
  for (std::size_t t = 0; t < truth.n_frames(); ++t) {
    os << t + 1 << ',' << int{truth.s[t]};
    for (std::size_t n = 0; n < truth.n_cameras(); ++n) {
      os << ',' << int{truth.o[n][t]};
    }
    os << '\n';
  }
}

CsvTable read_csv(std::istream& is) {
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' ||
        line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    auto cells = split_csv(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw StreamError(lineno, "expected " +
                                    std::to_string(table.header.size()) +
                                    " columns, got " +
                                    std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw StreamError(lineno, "missing CSV header");
  return table;
}

sim::GroundTruth read_truth_csv(std::istream& is) {
  const CsvTable table = read_csv(is);
  if (table.header.size() < 3 || table.header[0] != "t" ||
      table.header[1] != "s") {
    throw StreamError(1, "ground truth header must be t,s,o_1..o_N");
  }
  const std::size_t n_cam = table.header.size() - 2;
  sim::GroundTruth gt;
  gt.o.assign(n_cam, {});
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (to_index(row[0], r + 2) != r + 1) {
      throw StreamError(r + 2, "ground truth rows must be t = 1, 2, ...");
    }
    gt.s.push_back(to_index(row[1], r + 2) != 0);
    for (std::size_t n = 0; n < n_cam; ++n) {
      gt.o[n].push_back(to_index(row[2 + n], r + 2) != 0);
    }
  }
  return gt;
}

void write_posterior_header(std::ostream& os, std::size_t n_cameras) {
  write_header_comment(os);
  os << "t,p_S";
  for (std::size_t n = 0; n < n_cameras; ++n) os << ",p_O_" << n + 1;
  for (std::size_t n = 0; n < n_cameras; ++n) os << ",lambda_" << n + 1;
  os << ",alarm\n";
}

void write_posterior_row(std::ostream& os, const PosteriorRow& row) {
  os << row.t << ',' << format_double(row.p_change);
  for (double p : row.p_occlusion) os << ',' << format_double(p);
  for (double l : row.lambdas) os << ',' << format_double(l);
  os << ',' << (row.alarm ? 1 : 0) << '\n';
}

std::vector<PosteriorRow> read_posterior_csv(std::istream& is) {
  const CsvTable table = read_csv(is);
  const auto& h = table.header;
  if (h.size() < 5 || h[0] != "t" || h[1] != "p_S" || h.back() != "alarm" ||
      (h.size() - 3) % 2 != 0) {
    throw StreamError(1, "posterior header must be "
                         "t,p_S,p_O_1..p_O_N,lambda_1..lambda_N,alarm");
  }
  const std::size_t n_cam = (h.size() - 3) / 2;
  std::vector<PosteriorRow> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    PosteriorRow p;
    p.t = to_index(row[0], r + 2);
    p.p_change = to_double(row[1], r + 2);
    for (std::size_t n = 0; n < n_cam; ++n) {
      p.p_occlusion.push_back(to_double(row[2 + n], r + 2));
      p.lambdas.push_back(to_double(row[2 + n_cam + n], r + 2));
    }
    p.alarm = to_index(row.back(), r + 2) != 0;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace occhmm::io
