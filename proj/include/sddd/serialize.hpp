#ifndef SDDD_SERIALIZE_HPP
#define SDDD_SERIALIZE_HPP

#include <string>

#include <json.hpp>

#include "sddd/diagnostics.hpp"
#include "sddd/estimators.hpp"
#include "sddd/inference.hpp"
#include "sddd/panel.hpp"
#include "sddd/simulation.hpp"
#include "sddd/stacks.hpp"

namespace sddd {

using Json = nlohmann::json;

Json to_json(const ValidationReport &report);
Json stack_roster_json(const std::vector<Stack> &stacks,
                       const PanelDataset &ds);
Json to_json(const StackAttTable &table);
Json to_json(const EventStudyResult &result);
Json to_json(const BandResult &band);
Json to_json(const AuxWeightTable &table);
Json to_json(const AggWeightTable &table);
Json to_json(const WeightPropertyReport &report);
Json to_json(const PreTrendReport &report);
Json to_json(const McSummary &summary);

// Tidy delimiter-separated text, one row per (stack, event time):
// g,e,estimate,weight,n_g1,n_g0,ngc1,ngc0. Weights default to zero when the
// result does not cover a (g,e).
std::string att_tables_csv(const std::vector<StackAttTable> &tables,
                           const EventStudyResult *result = nullptr);

// stack,unit,time,role,event_time,dy
std::string stacked_csv(const StackedDataset &stacked, const PanelDataset &ds);

// g,ell,j,omega
std::string aux_weights_csv(const AuxWeightTable &table);

// g,ell,omega
std::string agg_weights_csv(const AggWeightTable &table);

std::string mc_summary_csv(const McSummary &summary);

// DgpConfig from its JSON form. Trend functions come as named parametric
// families; see the README for the field reference.
DgpConfig dgp_from_json(const Json &spec);

std::vector<EstimatorSpec> estimator_specs_from_json(const Json &spec);

void write_text_file(const std::string &path, const std::string &content);
void write_json_file(const std::string &path, const Json &value);

}  // namespace sddd

#endif  // SDDD_SERIALIZE_HPP
