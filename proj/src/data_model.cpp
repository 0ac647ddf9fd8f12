#include "fdcov/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace fdcov {

std::size_t FunctionalSample::observation_count() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.obs.size();
  return n;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& field, std::size_t row, const std::string& column) {
  const std::string t = trim(field);
  double value = 0.0;
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value))
    throw InputError("row " + std::to_string(row) + ": cannot parse " + column + " value '" +
                     field + "'");
  return value;
}

struct RawRecord {
  std::string subject;
  double time;
  double value;
  std::string group;
};

}  // namespace

IngestResult ingest_csv(const std::string& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw InputError("empty CSV file: " + path);
  const auto header = split_line(line);

  auto column_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (trim(header[i]) == name) return static_cast<int>(i);
    throw InputError("missing column '" + name + "' in " + path);
  };
  const int ci_subject = column_index(options.subject_column);
  const int ci_time = column_index(options.time_column);
  const int ci_value = column_index(options.value_column);
  const int ci_group = column_index(options.group_column);
  const std::size_t min_fields =
      static_cast<std::size_t>(std::max({ci_subject, ci_time, ci_value, ci_group})) + 1;

  std::vector<RawRecord> records;
  std::vector<std::string> group_labels;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() < min_fields)
      throw InputError("row " + std::to_string(row) + ": expected at least " +
                       std::to_string(min_fields) + " fields");
    RawRecord rec;
    rec.subject = trim(fields[ci_subject]);
    rec.time = parse_double(fields[ci_time], row, options.time_column);
    rec.value = parse_double(fields[ci_value], row, options.value_column);
    rec.group = trim(fields[ci_group]);
    if (std::find(group_labels.begin(), group_labels.end(), rec.group) == group_labels.end())
      group_labels.push_back(rec.group);
    records.push_back(std::move(rec));
  }
  if (group_labels.size() != 2)
    throw InputError("expected exactly two group labels, found " +
                     std::to_string(group_labels.size()));

  IngestResult result;
  double tmin = records.front().time, tmax = records.front().time;
  for (const auto& r : records) {
    tmin = std::min(tmin, r.time);
    tmax = std::max(tmax, r.time);
  }
  result.raw_time_min = tmin;
  result.raw_time_max = tmax;
  const bool out_of_range = tmin < 0.0 || tmax > 1.0;
  if (out_of_range) {
    if (!options.rescale_time)
      throw InputError("times outside [0,1]; pass --rescale-time to map them affinely");
    if (tmax == tmin) throw InputError("cannot rescale: all observation times are equal");
    result.rescaled = true;
    for (auto& r : records) r.time = (r.time - tmin) / (tmax - tmin);
  }

  // Group per subject per group, preserving first-appearance order.
  for (int g = 0; g < 2; ++g) {
    FunctionalSample& sample = g == 0 ? result.x : result.y;
    sample.group_label = group_labels[g];
    std::map<std::string, int> index_of;
    for (const auto& r : records) {
      if (r.group != sample.group_label) continue;
      auto it = index_of.find(r.subject);
      if (it == index_of.end()) {
        index_of.emplace(r.subject, sample.subject_count());
        sample.subjects.push_back(Subject{r.subject, {}});
        it = index_of.find(r.subject);
      }
      sample.subjects[it->second].obs.push_back(Observation{r.time, r.value});
    }
    auto kept = std::vector<Subject>{};
    for (auto& s : sample.subjects) {
      if (s.obs.size() >= 2)
        kept.push_back(std::move(s));
      else
        ++result.dropped_subjects;
    }
    sample.subjects = std::move(kept);
    if (sample.subjects.empty())
      throw InputError("group '" + sample.group_label + "' has no usable subjects");
  }
  if (result.dropped_subjects > 0)
    std::fprintf(stderr, "dropped_subjects=%d\n", result.dropped_subjects);
  return result;
}

void write_csv(const std::string& path, const FunctionalSample& x, const FunctionalSample& y,
               const IngestOptions& options) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path);
  out << options.subject_column << ',' << options.time_column << ',' << options.value_column
      << ',' << options.group_column << '\n';
  char buf[64];
  auto emit = [&](const FunctionalSample& s) {
    for (const auto& subj : s.subjects)
      for (const auto& o : subj.obs) {
        out << subj.id << ',';
        std::snprintf(buf, sizeof buf, "%.17g", o.time);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", o.value);
        out << buf << ',' << s.group_label << '\n';
      }
  };
  emit(x);
  emit(y);
}

namespace {

GroupSplit split_indices(int count, SplitPolicy policy, RngStream* rng) {
  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  if (policy == SplitPolicy::random_seeded) {
    for (int i = count - 1; i > 0; --i) {
      const int j = static_cast<int>(rng->uniform_index(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }
  }
  GroupSplit split;
  for (int pos = 0; pos < count; ++pos) {
    if (pos % 2 == 1)
      split.half_a.push_back(order[pos]);  // even 1-based positions
    else
      split.half_b.push_back(order[pos]);
  }
  return split;
}

}  // namespace

SplitAssignment split_sample(const FunctionalSample& sample_x, const FunctionalSample& sample_y,
                             SplitPolicy policy, std::uint64_t seed) {
  if (sample_x.subject_count() < 4 || sample_y.subject_count() < 4)
    throw InputError("split_sample: each group needs at least 4 subjects");
  SplitAssignment assignment;
  assignment.policy = policy;
  assignment.seed = seed;
  RngStream rng(seed);
  RngStream* rng_ptr = policy == SplitPolicy::random_seeded ? &rng : nullptr;
  assignment.x = split_indices(sample_x.subject_count(), policy, rng_ptr);
  assignment.y = split_indices(sample_y.subject_count(), policy, rng_ptr);
  return assignment;
}

std::pair<FunctionalSample, FunctionalSample> permute_groups(const FunctionalSample& sample_x,
                                                             const FunctionalSample& sample_y,
                                                             RngStream& rng) {
  std::vector<const Subject*> pool;
  pool.reserve(sample_x.subjects.size() + sample_y.subjects.size());
  for (const auto& s : sample_x.subjects) pool.push_back(&s);
  for (const auto& s : sample_y.subjects) pool.push_back(&s);
  const int total = static_cast<int>(pool.size());
  for (int i = total - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
    std::swap(pool[i], pool[j]);
  }
  FunctionalSample px{sample_x.group_label, {}};
  FunctionalSample py{sample_y.group_label, {}};
  const int nx = sample_x.subject_count();
  for (int i = 0; i < total; ++i) {
    (i < nx ? px : py).subjects.push_back(*pool[i]);
  }
  return {std::move(px), std::move(py)};
}

namespace {

FunctionalSample bootstrap_one(const FunctionalSample& sample, RngStream& rng) {
  FunctionalSample out{sample.group_label, {}};
  const int n = sample.subject_count();
  std::vector<int> draw_count(n, 0);
  out.subjects.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int pick = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    Subject copy = sample.subjects[pick];
    if (++draw_count[pick] > 1) copy.id += "#" + std::to_string(draw_count[pick]);
    out.subjects.push_back(std::move(copy));
  }
  return out;
}

}  // namespace

std::pair<FunctionalSample, FunctionalSample> bootstrap_within_groups(
    const FunctionalSample& sample_x, const FunctionalSample& sample_y, RngStream& rng) {
  return {bootstrap_one(sample_x, rng), bootstrap_one(sample_y, rng)};
}

}  // namespace fdcov
