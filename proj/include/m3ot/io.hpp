#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "m3ot/metrics.hpp"
#include "m3ot/policy.hpp"
#include "m3ot/scenario.hpp"
#include "m3ot/tracker.hpp"

namespace m3ot {

/// Malformed or truncated interchange file; the message carries the line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Interchange files are line-delimited text. The first line is a magic
// comment "# m3ot <kind> v1"; other '#' lines are headers and are ignored on
// input. Every record starts with a tag followed by fixed columns. Numbers are
// written in shortest round-trip form, so reading back is exact.

void write_calibration(std::ostream& out, const SensorRig& rig);
SensorRig read_calibration(std::istream& in);

void write_scenario(std::ostream& out, const Scenario& scenario);
Scenario read_scenario(std::istream& in);

void write_policy(std::ostream& out, const PolicySet& policy);
PolicySet read_policy(std::istream& in);

/// One line per (record, camera box); records without boxes use camera -1.
void write_tracks(std::ostream& out, std::span<const TrackRecord> records);
std::vector<TrackRecord> read_tracks(std::istream& in);

void write_report(std::ostream& out, const EvalReport& report);

// Path-based wrappers; a file that cannot be opened throws std::runtime_error.
void save_scenario(const std::string& path, const Scenario& scenario);
Scenario load_scenario(const std::string& path);
void save_calibration(const std::string& path, const SensorRig& rig);
SensorRig load_calibration(const std::string& path);
void save_policy(const std::string& path, const PolicySet& policy);
PolicySet load_policy(const std::string& path);
void save_tracks(const std::string& path, std::span<const TrackRecord> records);
std::vector<TrackRecord> load_tracks(const std::string& path);

}  // namespace m3ot
