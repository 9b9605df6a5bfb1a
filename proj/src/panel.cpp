#include "sddd/panel.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace sddd {

PanelDataset::PanelDataset(std::vector<UnitRecord> units,
                           std::vector<long long> calendar_times,
                           std::map<std::string, std::string> metadata)
    : units_(std::move(units)),
      calendar_times_(std::move(calendar_times)),
      metadata_(std::move(metadata)) {
  if (units_.empty()) throw ConfigError("PanelDataset: no units");
  if (calendar_times_.empty())
    throw ConfigError("PanelDataset: empty time range");
  t_min_ = 1;
  t_max_ = static_cast<int>(calendar_times_.size());

  std::set<CohortLabel> cohort_set;
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const UnitRecord &u = units_[i];
    if (!index_.emplace(u.unit_id, i).second) {
      throw DuplicateError("PanelDataset: duplicate unit id '" + u.unit_id +
                           "'");
    }
    for (const auto &kv : u.outcomes) {
      if (kv.first < t_min_ || kv.first > t_max_) {
        throw ConfigError("PanelDataset: unit '" + u.unit_id +
                          "' observes time " + std::to_string(kv.first) +
                          " outside [1," + std::to_string(t_max_) + "]");
      }
    }
    if (u.cohort.is_finite() &&
        (u.cohort.time() < t_min_ || u.cohort.time() > t_max_)) {
      throw ConfigError("PanelDataset: cohort " + u.cohort.to_string() +
                        " of unit '" + u.unit_id + "' outside time range");
    }
    cohort_set.insert(u.cohort);
  }
  cohorts_.assign(cohort_set.begin(), cohort_set.end());
}

std::optional<std::size_t> PanelDataset::find_unit(
    const std::string &id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t PanelDataset::require_unit(const std::string &id) const {
  auto idx = find_unit(id);
  if (!idx) throw LookupError("unknown unit '" + id + "'");
  return *idx;
}

std::vector<int> PanelDataset::treated_cohorts() const {
  std::vector<int> out;
  for (const auto &c : cohorts_) {
    if (c.is_finite()) out.push_back(c.time());
  }
  return out;
}

bool PanelDataset::has_never_treated() const {
  return !cohorts_.empty() && cohorts_.back().is_never();
}

namespace {

std::vector<std::string> split_row(const std::string &line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string &s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

long long parse_int(const std::string &s, std::size_t row,
                    const std::string &what) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception &) {
    throw ParseError("row " + std::to_string(row) + ": bad " + what + " '" +
                     s + "'");
  }
}

double parse_real(const std::string &s, std::size_t row,
                  const std::string &what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception &) {
    throw ParseError("row " + std::to_string(row) + ": bad " + what + " '" +
                     s + "'");
  }
}

bool parse_eligible(const std::string &raw, std::size_t row) {
  const std::string s = lower(trim(raw));
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw SchemaError("row " + std::to_string(row) +
                    ": eligible value '" + raw +
                    "' not in {0,1,true,false}");
}

struct RawUnit {
  bool never = false;
  long long cohort_cal = 0;
  bool eligible = false;
  bool eligible_set = false;
  std::map<long long, double> outcomes_cal;  // calendar time -> outcome
};

}  // namespace

PanelDataset load_panel(std::istream &in, const PanelSchema &schema) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty input: no header row");
  const auto header = split_row(line, schema.delimiter);
  auto col = [&](const std::string &name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw SchemaError("missing column '" + name + "' in header");
  };
  const std::size_t c_unit = col(schema.unit_column);
  const std::size_t c_time = col(schema.time_column);
  const std::size_t c_outcome = col(schema.outcome_column);
  const std::size_t c_cohort = col(schema.cohort_column);
  const std::size_t c_elig = col(schema.eligible_column);

  // Unit order of first appearance is preserved so that load/write round
  // trips are stable.
  std::vector<std::string> unit_order;
  std::map<std::string, RawUnit> raw;
  std::set<long long> times_cal;

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split_row(line, schema.delimiter);
    if (f.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(f.size()));
    }
    const std::string id = trim(f[c_unit]);
    if (id.empty()) throw ParseError("row " + std::to_string(row) + ": empty unit id");
    const long long t_cal = parse_int(trim(f[c_time]), row, "time");
    const double y = parse_real(trim(f[c_outcome]), row, "outcome");
    const std::string cohort_raw = trim(f[c_cohort]);
    const bool never = cohort_raw.empty() || cohort_raw == schema.never_token;
    const long long cohort_cal =
        never ? 0 : parse_int(cohort_raw, row, "cohort");
    const bool elig = parse_eligible(f[c_elig], row);

    auto [it, inserted] = raw.try_emplace(id);
    RawUnit &u = it->second;
    if (inserted) {
      unit_order.push_back(id);
      u.never = never;
      u.cohort_cal = cohort_cal;
      u.eligible = elig;
      u.eligible_set = true;
    } else {
      if (u.never != never || (!never && u.cohort_cal != cohort_cal)) {
        throw SchemaError("row " + std::to_string(row) + ": unit '" + id +
                          "' has conflicting cohort values");
      }
      if (u.eligible != elig) {
        throw SchemaError("row " + std::to_string(row) + ": unit '" + id +
                          "' has time-varying eligibility");
      }
    }
    if (!u.outcomes_cal.emplace(t_cal, y).second) {
      throw DuplicateError("row " + std::to_string(row) +
                           ": duplicate observation for unit " + id +
                           " at time " + std::to_string(t_cal));
    }
    times_cal.insert(t_cal);
  }
  if (raw.empty()) throw ParseError("no data rows");

  // Remap calendar periods to 1..T.
  std::vector<long long> calendar(times_cal.begin(), times_cal.end());
  std::map<long long, int> to_index;
  for (std::size_t i = 0; i < calendar.size(); ++i) {
    to_index[calendar[i]] = static_cast<int>(i) + 1;
  }

  std::vector<UnitRecord> units;
  units.reserve(unit_order.size());
  for (const auto &id : unit_order) {
    const RawUnit &u = raw.at(id);
    UnitRecord rec;
    rec.unit_id = id;
    rec.eligible = u.eligible;
    if (u.never) {
      rec.cohort = CohortLabel::never();
    } else {
      auto it = to_index.find(u.cohort_cal);
      if (it == to_index.end()) {
        throw SchemaError("unit '" + id + "': cohort " +
                          std::to_string(u.cohort_cal) +
                          " is not an observed time period");
      }
      rec.cohort = CohortLabel::finite(it->second);
    }
    for (const auto &kv : u.outcomes_cal) {
      rec.outcomes[to_index.at(kv.first)] = kv.second;
    }
    units.push_back(std::move(rec));
  }
  return PanelDataset(std::move(units), std::move(calendar));
}

PanelDataset load_panel_file(const std::string &path,
                             const PanelSchema &schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return load_panel(in, schema);
}

void write_panel(std::ostream &out, const PanelDataset &ds,
                 const PanelSchema &schema) {
  const char d = schema.delimiter;
  out << schema.unit_column << d << schema.time_column << d
      << schema.outcome_column << d << schema.cohort_column << d
      << schema.eligible_column << "\n";
  char buf[40];
  for (const auto &u : ds.units()) {
    const std::string cohort = u.cohort.is_never()
                                   ? schema.never_token
                                   : std::to_string(ds.calendar_time(
                                         u.cohort.time()));
    for (const auto &kv : u.outcomes) {
      std::snprintf(buf, sizeof(buf), "%.17g", kv.second);
      out << u.unit_id << d << ds.calendar_time(kv.first) << d << buf << d
          << cohort << d << (u.eligible ? 1 : 0) << "\n";
    }
  }
}

void write_panel_file(const std::string &path, const PanelDataset &ds,
                      const PanelSchema &schema) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_panel(out, ds, schema);
}

ValidationReport validate_panel(const PanelDataset &ds) {
  ValidationReport report;
  std::map<std::pair<CohortLabel, bool>, int> counts;
  for (const auto &u : ds.units()) {
    counts[{u.cohort, u.eligible}] += 1;
  }
  for (const auto &c : ds.cohorts()) {
    for (bool q : {false, true}) {
      CellCountEntry entry;
      entry.cohort = c;
      entry.eligible = q;
      auto it = counts.find({c, q});
      entry.count = it == counts.end() ? 0 : it->second;
      report.cell_counts.push_back(entry);
      if (entry.count == 0) {
        report.violations.push_back(
            {"empty_cell", "empty cell (" + c.to_string() + "," +
                               (q ? "1" : "0") + ")"});
        report.overlap_ok = false;
      }
    }
    if (c.is_finite() && c.time() - 1 < ds.t_min()) {
      report.violations.push_back(
          {"cohort_out_of_range",
           "cohort " + c.to_string() +
               " before first differencing period (no baseline " +
               std::to_string(c.time() - 1) + ")"});
    }
  }
  return report;
}

std::optional<double> long_difference(const PanelDataset &ds,
                                      std::size_t unit_idx, int t,
                                      int baseline) {
  const UnitRecord &u = ds.unit(unit_idx);
  const auto yt = u.outcome(t);
  const auto yb = u.outcome(baseline);
  if (!yt || !yb) return std::nullopt;
  return *yt - *yb;
}

std::optional<double> long_difference(const PanelDataset &ds,
                                      const std::string &unit_id, int t,
                                      int baseline) {
  return long_difference(ds, ds.require_unit(unit_id), t, baseline);
}

CellMean cell_mean(const PanelDataset &ds,
                   const std::vector<std::size_t> &member_indexes, int t,
                   int baseline) {
  if (member_indexes.empty())
    throw EmptyCellError("cell_mean: no members given");
  CellMean out;
  double sum = 0.0;
  for (std::size_t idx : member_indexes) {
    const auto dy = long_difference(ds, idx, t, baseline);
    if (!dy) {
      out.dropped += 1;
      continue;
    }
    sum += *dy;
    out.count += 1;
  }
  if (out.count == 0) {
    throw EmptyCellError("cell_mean: no usable members at t=" +
                         std::to_string(t) + " baseline=" +
                         std::to_string(baseline));
  }
  out.mean = sum / static_cast<double>(out.count);
  return out;
}

CellMean cell_mean_by_id(const PanelDataset &ds,
                         const std::vector<std::string> &member_ids, int t,
                         int baseline) {
  std::vector<std::size_t> idx;
  idx.reserve(member_ids.size());
  for (const auto &id : member_ids) idx.push_back(ds.require_unit(id));
  return cell_mean(ds, idx, t, baseline);
}

}  // namespace sddd
