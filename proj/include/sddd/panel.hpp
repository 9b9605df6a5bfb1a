#ifndef SDDD_PANEL_HPP
#define SDDD_PANEL_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sddd/errors.hpp"

namespace sddd {

// Treatment-enabling cohort of a unit: either the integer period at which
// the unit's group becomes exposed, or a dedicated never-treated sentinel.
// The sentinel carries no numeric value, so arithmetic on it is impossible
// by construction.
class CohortLabel {
 public:
  static CohortLabel finite(int g) { return CohortLabel(false, g); }
  static CohortLabel never() { return CohortLabel(true, 0); }

  bool is_never() const { return never_; }
  bool is_finite() const { return !never_; }

  // Treatment onset period; throws for the never-treated sentinel.
  int time() const {
    if (never_) throw LookupError("CohortLabel: never-treated has no onset time");
    return g_;
  }

  friend bool operator==(const CohortLabel &a, const CohortLabel &b) {
    return a.never_ == b.never_ && (a.never_ || a.g_ == b.g_);
  }
  friend bool operator!=(const CohortLabel &a, const CohortLabel &b) {
    return !(a == b);
  }
  // Finite labels ascending; never sorts after every finite label.
  friend bool operator<(const CohortLabel &a, const CohortLabel &b) {
    if (a.never_ != b.never_) return b.never_;
    if (a.never_) return false;
    return a.g_ < b.g_;
  }

  std::string to_string() const {
    return never_ ? std::string("never") : std::to_string(g_);
  }

 private:
  CohortLabel(bool never, int g) : never_(never), g_(g) {}
  bool never_;
  int g_;
};

struct UnitRecord {
  std::string unit_id;
  CohortLabel cohort = CohortLabel::never();
  bool eligible = false;
  // Outcome by (remapped) time period; the key set is the unit's set of
  // observed times.
  std::map<int, double> outcomes;

  bool observes(int t) const { return outcomes.count(t) > 0; }
  std::optional<double> outcome(int t) const {
    auto it = outcomes.find(t);
    if (it == outcomes.end()) return std::nullopt;
    return it->second;
  }
};

// Immutable long panel. Times are consecutive integers 1..T produced by
// remapping the input's calendar periods at load; calendar_times keeps the
// original values for serialization. All read operations are const and safe
// to call concurrently.
class PanelDataset {
 public:
  PanelDataset(std::vector<UnitRecord> units,
               std::vector<long long> calendar_times,
               std::map<std::string, std::string> metadata = {});

  const std::vector<UnitRecord> &units() const { return units_; }
  const UnitRecord &unit(std::size_t idx) const { return units_.at(idx); }
  std::size_t n_units() const { return units_.size(); }

  int t_min() const { return t_min_; }
  int t_max() const { return t_max_; }

  std::optional<std::size_t> find_unit(const std::string &id) const;
  std::size_t require_unit(const std::string &id) const;

  // Distinct cohort labels present, finite ascending with never last.
  const std::vector<CohortLabel> &cohorts() const { return cohorts_; }
  // Finite cohorts only, ascending.
  std::vector<int> treated_cohorts() const;
  bool has_never_treated() const;

  const std::vector<long long> &calendar_times() const {
    return calendar_times_;
  }
  long long calendar_time(int t) const {
    return calendar_times_.at(static_cast<std::size_t>(t - 1));
  }

  const std::map<std::string, std::string> &metadata() const {
    return metadata_;
  }

 private:
  std::vector<UnitRecord> units_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<CohortLabel> cohorts_;
  std::vector<long long> calendar_times_;
  std::map<std::string, std::string> metadata_;
  int t_min_ = 0;
  int t_max_ = 0;
};

// Column-name map plus parsing options for delimiter-separated input.
struct PanelSchema {
  std::string unit_column = "unit";
  std::string time_column = "time";
  std::string outcome_column = "outcome";
  std::string cohort_column = "cohort";
  std::string eligible_column = "eligible";
  // Tokens in the cohort column meaning never-treated. The empty string is
  // always accepted alongside the configured token.
  std::string never_token = "never";
  char delimiter = ',';
};

struct CellCountEntry {
  CohortLabel cohort = CohortLabel::never();
  bool eligible = false;
  int count = 0;
};

struct Violation {
  std::string kind;
  std::string message;
};

struct ValidationReport {
  std::vector<CellCountEntry> cell_counts;
  std::vector<Violation> violations;
  bool overlap_ok = true;
};

struct CellMean {
  double mean = 0.0;
  int count = 0;    // units actually averaged
  int dropped = 0;  // members missing t or the baseline
};

PanelDataset load_panel(std::istream &in, const PanelSchema &schema = {});
PanelDataset load_panel_file(const std::string &path,
                             const PanelSchema &schema = {});

// Writes the panel back out under the same schema, using calendar times.
void write_panel(std::ostream &out, const PanelDataset &ds,
                 const PanelSchema &schema = {});
void write_panel_file(const std::string &path, const PanelDataset &ds,
                      const PanelSchema &schema = {});

// Report-only check: enumerates (cohort, eligibility) cell counts, flags
// empty cells within observed cohorts and cohorts with no usable baseline.
ValidationReport validate_panel(const PanelDataset &ds);

// Y_{unit,t} - Y_{unit,baseline} if both observed.
std::optional<double> long_difference(const PanelDataset &ds,
                                      const std::string &unit_id, int t,
                                      int baseline);
std::optional<double> long_difference(const PanelDataset &ds,
                                      std::size_t unit_idx, int t,
                                      int baseline);

// Mean of long differences over the given members; units missing either
// period are dropped and tallied. Throws EmptyCellError when nothing usable
// remains.
CellMean cell_mean(const PanelDataset &ds,
                   const std::vector<std::size_t> &member_indexes, int t,
                   int baseline);
CellMean cell_mean_by_id(const PanelDataset &ds,
                         const std::vector<std::string> &member_ids, int t,
                         int baseline);

}  // namespace sddd

#endif  // SDDD_PANEL_HPP
