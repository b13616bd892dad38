// epiflow: reconstruct excess-mortality curves from historical count data,
// build NPI and trade-disruption measures, and run the associated
// regressions, all driven by a manifest of CSV inputs.

#include <CLI11.hpp>
#include <iostream>

#include "epiflow/errors.hpp"
#include "epiflow/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitEstimation = 3;

using namespace epiflow;

struct CommonArgs {
    std::string manifest_path;
};

int run_stage(const CommonArgs& args, pipeline::Stage stage) {
    auto manifest = pipeline::load_manifest(args.manifest_path);
    auto bundle = pipeline::run_pipeline(manifest, stage);
    auto summary = pipeline::emit_report(bundle, manifest, stage == pipeline::Stage::report);
    for (const auto& w : bundle.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    for (const auto& [s, hit] : summary.stage_cache_hit) {
        if (hit) std::cerr << "stage " << s << ": cache hit, outputs unchanged\n";
    }
    std::cout << "wrote " << summary.files_written.size() << " file(s)\n";
    return kExitOk;
}

std::int64_t parse_period(const std::string& s) {
    // YYYY-MM -> month key, YYYY -> year
    if (s.size() == 7 && s[4] == '-') {
        return static_cast<std::int64_t>(std::stoi(s.substr(0, 4))) * 12 +
               (std::stoi(s.substr(5, 2)) - 1);
    }
    if (s.size() == 4) return std::stoi(s);
    throw ValidationError("expected YYYY or YYYY-MM period, got '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"excess-mortality reconstruction and NPI analysis pipeline"};
    app.require_subcommand(1);

    CommonArgs common;
    std::map<std::string, pipeline::Stage> stage_cmds = {
        {"reconstruct", pipeline::Stage::reconstruct},
        {"measures", pipeline::Stage::measures},
        {"classify", pipeline::Stage::classify},
        {"instrument", pipeline::Stage::instrument},
        {"report", pipeline::Stage::report},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, stage] : stage_cmds) {
        (void)stage;
        CLI::App* sub = app.add_subcommand(
            name, "run the " + name + " stage (and its dependencies)");
        sub->add_option("--manifest", common.manifest_path, "manifest file")
            ->required();
        subs[name] = sub;
    }

    // regress: the stage tables by default, or a single ad-hoc model when
    // --outcome/--treatment are given
    CLI::App* regress = app.add_subcommand("regress", "regression stage or ad-hoc model");
    regress->add_option("--manifest", common.manifest_path, "manifest file")->required();
    std::string outcome, treatment, controls_arg, cov_arg = "hc1", iv_col;
    std::string post_from_arg, base_year_arg, cluster_arg, fe_arg;
    bool oster = false;
    unsigned long long seed = 0;
    regress->add_option("--outcome", outcome, "outcome column");
    regress->add_option("--treatment", treatment, "regressor of interest");
    regress->add_option("--controls", controls_arg, "comma-separated control columns");
    regress->add_option("--fe", fe_arg,
                        "fixed effects (panel models always absorb city,time)");
    regress->add_option("--cluster", cluster_arg, "cluster dimension (city)");
    regress->add_option("--post-from", post_from_arg, "Post starts here (YYYY-MM or YYYY)");
    regress->add_option("--base-year", base_year_arg, "event-study base year");
    regress->add_option("--cov", cov_arg, "hc0|hc1|hc2|hc3|cluster|classical");
    regress->add_flag("--oster", oster, "report the proportional-selection bound");
    regress->add_option("--iv", iv_col, "instrument column (treatment is endogenous)");
    regress->add_option("--seed", seed, "Monte Carlo harness seed (unused by the pipeline)");

    CLI::App* explain = app.add_subcommand("explain", "print the lineage of a report cell");
    explain->add_option("--manifest", common.manifest_path, "manifest file")->required();
    std::string cell;
    explain
        ->add_option("--cell", cell,
                     "cell reference: report:row_key:column (row_key/column may be *)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto& [name, stage] : stage_cmds) {
            if (subs[name]->parsed()) return run_stage(common, stage);
        }
        if (regress->parsed()) {
            if (outcome.empty() != treatment.empty()) {
                throw ValidationError("--outcome and --treatment go together");
            }
            if (outcome.empty()) {
                return run_stage(common, pipeline::Stage::regress);
            }
            auto manifest = pipeline::load_manifest(common.manifest_path);
            auto bundle =
                pipeline::run_pipeline(manifest, pipeline::Stage::instrument);
            pipeline::FlexRegressionSpec spec;
            spec.outcome = outcome;
            spec.treatment = treatment;
            if (!controls_arg.empty()) {
                std::stringstream ss(controls_arg);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    if (!item.empty()) spec.controls.push_back(item);
                }
            }
            if (!cluster_arg.empty() && cluster_arg != "city") {
                throw ValidationError("only --cluster city is supported");
            }
            if (!fe_arg.empty() && fe_arg != "city,year" && fe_arg != "city,month" &&
                fe_arg != "city,time") {
                throw ValidationError("panel models absorb city and time; --fe must "
                                      "be city,year / city,month");
            }
            spec.cov = econ::cov_flavor_from_string(cov_arg);
            spec.oster = oster;
            spec.instrument = iv_col;
            if (!post_from_arg.empty()) spec.post_from = parse_period(post_from_arg);
            if (!base_year_arg.empty()) {
                spec.base_year = static_cast<int>(parse_period(base_year_arg));
            }
            auto result = pipeline::run_regression(manifest, bundle, spec);
            pipeline::write_regression_output(manifest, result, spec);
            for (int idx : result.focal_terms) {
                if (idx < 0) continue;
                std::cout << result.fit.terms[static_cast<size_t>(idx)] << " = "
                          << result.fit.coef(idx) << " (se " << result.fit.se(idx)
                          << ")\n";
            }
            return kExitOk;
        }
        if (explain->parsed()) {
            auto manifest = pipeline::load_manifest(common.manifest_path);
            auto first = cell.find(':');
            auto second = cell.find(':', first + 1);
            if (first == std::string::npos || second == std::string::npos) {
                throw ValidationError("--cell wants report:row_key:column");
            }
            std::cout << pipeline::explain_cell(
                manifest, cell.substr(0, first),
                cell.substr(first + 1, second - first - 1), cell.substr(second + 1));
            return kExitOk;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const EstimationError& e) {
        std::cerr << "estimation error: " << e.what() << "\n";
        return kExitEstimation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
