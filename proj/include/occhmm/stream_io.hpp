#pragma once

// File formats.
//
// Stream (NDJSON), one record per frame:
//   {"format_version":1,"t":1,"mode":"direct_z",
//    "cameras":[{"z":0.41},{"z":1.7}],"truth":{"s":0,"o":[0,1]}}
//   {"format_version":1,"t":1,"mode":"patch",
//    "cameras":[{"patch":[0.1,0.2,...]},...]}
// "truth" is optional. t starts at 1 and strictly increases.
//
// Ground truth (CSV): "# format_version=1", then "t,s,o_1,...,o_N".
// Posterior trace (CSV): "# format_version=1", then
//   "t,p_S,p_O_1..p_O_N,lambda_1..lambda_N,alarm".
//
// Reals are written in shortest round-trip decimal form.

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "occhmm/scene_simulator.hpp"

namespace occhmm::io {

class StreamError : public std::runtime_error {
 public:
  StreamError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct Stream {
  sim::Mode mode = sim::Mode::kDirectZ;
  std::size_t n_cameras = 0;
  std::size_t patch_dim = 0;  // patch mode only
  std::vector<sim::FrameRecord> frames;
};

std::string mode_name(sim::Mode mode);

void write_record(std::ostream& os, const sim::FrameRecord& record,
                  sim::Mode mode);
void write_stream(std::ostream& os, const sim::Scenario& scenario);

/// Throws StreamError with the 1-based line number of the first bad record.
Stream read_stream(std::istream& is);

void write_truth_csv(std::ostream& os, const sim::GroundTruth& truth);
sim::GroundTruth read_truth_csv(std::istream& is);

struct PosteriorRow {
  std::size_t t = 0;
  double p_change = 0.0;
  std::vector<double> p_occlusion;
  std::vector<double> lambdas;
  bool alarm = false;
};

void write_posterior_header(std::ostream& os, std::size_t n_cameras);
void write_posterior_row(std::ostream& os, const PosteriorRow& row);
std::vector<PosteriorRow> read_posterior_csv(std::istream& is);

/// Columns of a CSV file keyed by header name, for loosely-typed readers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::ptrdiff_t column(const std::string& name) const;
};

/// Skips blank lines and lines starting with '#'.
CsvTable read_csv(std::istream& is);

}  // namespace occhmm::io
