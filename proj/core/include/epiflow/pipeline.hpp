#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epiflow/econometrics.hpp"
#include "epiflow/geo.hpp"
#include "epiflow/manifest.hpp"
#include "epiflow/mortality.hpp"
#include "epiflow/npi.hpp"
#include "epiflow/report.hpp"
#include "epiflow/trade.hpp"

namespace epiflow::pipeline {

enum class Stage { reconstruct, measures, classify, instrument, regress, report };

Stage stage_from_string(const std::string& s);
std::string to_string(Stage s);

struct CityMortality {
    mortality::MortalityCurves curves;
    std::optional<mortality::MortalityOutcomes> outcomes;
    std::string exclusion_reason;  // set when outcomes are absent
    int imputed_cells = 0;
};

struct ManufacturingRow {
    std::string city_id;
    int year = 0;
    double employment = 0;
    double output = 0;
};

// Everything the pipeline produces: structured results plus the formatted
// tables that emit_report writes out.
struct ReportBundle {
    std::vector<CityMortality> mortality;  // sorted by (city, cause)
    std::vector<npi::NpiMeasures> npi_measures;
    std::optional<npi::HighNpiResult> npi_medians;
    trade::TradeTable trade;
    std::vector<geo::InstrumentValue> instrument;
    std::optional<mortality::AlignedGroupCurves> group_curves;

    // pass-through inputs the regression layer needs
    std::map<std::string, std::map<std::string, double>> city_controls;
    std::vector<ManufacturingRow> manufacturing_rows;

    std::vector<ReportTable> tables;
    std::vector<ProvenanceRecord> provenance;
    std::vector<std::string> warnings;

    const ReportTable* table(const std::string& name) const;
};

// Runs the stage graph up to `upto` (dependencies included) and returns
// the bundle. Deterministic: identical manifest and inputs produce
// byte-identical tables.
ReportBundle run_pipeline(const Manifest& manifest, Stage upto = Stage::report);

// Writes every table as CSV under the manifest's output_dir, plus the
// provenance sidecar; with markdown=true also renders report.md from the
// same formatted strings. Unchanged stages are cache hits: their files are
// left untouched.
struct EmitSummary {
    std::map<std::string, bool> stage_cache_hit;
    std::vector<std::string> files_written;
};

EmitSummary emit_report(const ReportBundle& bundle, const Manifest& manifest,
                        bool markdown = true);

// Lineage lookup for one report cell; row_key/column may be "*".
std::string explain_cell(const Manifest& manifest, const std::string& report,
                         const std::string& row_key, const std::string& column);

// --- ad-hoc regressions ------------------------------------------------------
// One regression assembled from the pipeline's datasets. The outcome picks
// the dataset: trade index columns run on the city-month panel,
// log_manuf_* on the census-year panel, everything else on the city
// cross-section.

struct FlexRegressionSpec {
    std::string outcome;
    std::string treatment;
    std::vector<std::string> controls;
    std::optional<std::int64_t> post_from;  // month key (trade) or year: DiD mode
    std::optional<int> base_year;           // event-study mode
    econ::CovFlavor cov = econ::CovFlavor::hc1;
    bool oster = false;
    std::string instrument;  // column name: 2SLS with `treatment` endogenous
};

struct FlexRegressionResult {
    econ::RegressionResult fit;
    std::string dataset;  // "city" | "trade" | "manufacturing"
    // focal coefficients: every term for cross-sections, the treatment
    // path for event studies
    std::vector<int> focal_terms;
    std::optional<econ::OsterBound> oster;
};

FlexRegressionResult run_regression(const Manifest& manifest,
                                    const ReportBundle& bundle,
                                    const FlexRegressionSpec& spec);

// Writes results.csv (term, estimate, se, t, p, ci_lo, ci_hi) and the
// model-metadata sidecar results_meta.csv under output_dir.
void write_regression_output(const Manifest& manifest,
                             const FlexRegressionResult& result,
                             const FlexRegressionSpec& spec);

}  // namespace epiflow::pipeline
