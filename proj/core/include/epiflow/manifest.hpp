#pragma once

#include <optional>
#include <string>
#include <vector>

#include "epiflow/calendar.hpp"
#include "epiflow/econometrics.hpp"
#include "epiflow/mortality.hpp"

namespace epiflow::pipeline {

// Flat key = value configuration driving the pipeline. Unknown keys are
// rejected; referenced input files must exist.
struct Manifest {
    std::string path;  // manifest file location (inputs resolve relative to it)

    // input CSVs (empty = stage skipped)
    std::string weekly_deaths;
    std::string monthly_baseline;
    std::string population;
    std::string npi_intervals;
    std::string trade_snippets;
    std::string camps;
    std::string locations;
    std::string controls;
    std::string manufacturing;

    std::string output_dir = "out";

    double scale = 100000.0;
    Date window_start = Date::from_ymd(1918, 9, 8);
    int window_weeks = 24;
    int weekly_bandwidth = 3;
    int monthly_bandwidth = 15;
    int impute_max_gap = 2;

    std::int64_t did_start = 1918ll * 12 + 0;   // 1918-01
    std::int64_t did_end = 1919ll * 12 + 2;     // 1919-03
    std::int64_t post_from = 1918ll * 12 + 7;   // 1918-08
    int base_year = 1914;
    int min_trade_obs = 9;

    // July..September 1918, for camp strength averaging
    std::int64_t camp_window_first = 1918ll * 12 + 6;
    std::int64_t camp_window_last = 1918ll * 12 + 8;

    econ::CovFlavor cross_section_cov = econ::CovFlavor::hc1;
    econ::CovFlavor panel_cov = econ::CovFlavor::cluster;

    std::vector<std::string> controls_baseline;
    std::vector<std::string> controls_extended;

    mortality::StudyWindow study_window() const {
        return mortality::StudyWindow{window_start, window_weeks};
    }
    mortality::ExcessParams excess_params() const;

    // Resolves a path from the manifest against the manifest's directory.
    std::string resolve(const std::string& p) const;
};

Manifest load_manifest(const std::string& path);
// Parses manifest text (tests); base_dir stands in for the file location.
Manifest parse_manifest(const std::string& text, const std::string& base_dir,
                        bool check_files = true);

}  // namespace epiflow::pipeline
