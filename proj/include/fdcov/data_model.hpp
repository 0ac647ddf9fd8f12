#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fdcov/numerics.hpp"

namespace fdcov {

struct Observation {
  double time;   // in [0,1] after optional rescaling
  double value;
};

struct Subject {
  std::string id;
  std::vector<Observation> obs;
};

// Long-format functional sample for one group. Subjects keep their input
// order; every subject has at least 2 observations and ids are unique.
struct FunctionalSample {
  std::string group_label;
  std::vector<Subject> subjects;

  int subject_count() const { return static_cast<int>(subjects.size()); }
  std::size_t observation_count() const;
};

enum class SplitPolicy { even_odd, random_seeded };

// Per-group half assignment, disjoint and exhaustive, sizes within 1.
// half_a holds the even 1-based input positions (2, 4, ...), half_b the odd
// ones; under the random policy positions are permuted first.
struct GroupSplit {
  std::vector<int> half_a;
  std::vector<int> half_b;
};

struct SplitAssignment {
  GroupSplit x;
  GroupSplit y;
  SplitPolicy policy;
  std::uint64_t seed = 0;  // meaningful for random_seeded only
};

struct IngestOptions {
  std::string subject_column = "subject_id";
  std::string time_column = "time";
  std::string value_column = "value";
  std::string group_column = "group";
  bool rescale_time = false;
};

struct IngestResult {
  FunctionalSample x;  // group of first appearance in the file
  FunctionalSample y;
  int dropped_subjects = 0;   // subjects with < 2 observations
  bool rescaled = false;
  double raw_time_min = 0.0;  // pooled, pre-rescale
  double raw_time_max = 1.0;
};

// Reads a long-format CSV (header row required) with the four schema columns
// and exactly two distinct group labels. Subjects with fewer than 2
// observations are dropped and counted. Times are affinely mapped to [0,1]
// by the pooled min/max when they fall outside [0,1] and rescaling was
// requested; out-of-range times without the flag are an error.
IngestResult ingest_csv(const std::string& path, const IngestOptions& options = {});

void write_csv(const std::string& path, const FunctionalSample& x, const FunctionalSample& y,
               const IngestOptions& options = {});

SplitAssignment split_sample(const FunctionalSample& sample_x, const FunctionalSample& sample_y,
                             SplitPolicy policy, std::uint64_t seed = 0);

// Pools all subjects and reassigns group labels uniformly at random,
// preserving the original group sizes. Observation lists are untouched.
std::pair<FunctionalSample, FunctionalSample> permute_groups(const FunctionalSample& sample_x,
                                                             const FunctionalSample& sample_y,
                                                             RngStream& rng);

// Resamples subjects with replacement within each group, keeping sizes.
// Re-drawn subjects get distinct synthetic id suffixes.
std::pair<FunctionalSample, FunctionalSample> bootstrap_within_groups(
    const FunctionalSample& sample_x, const FunctionalSample& sample_y, RngStream& rng);

}  // namespace fdcov
