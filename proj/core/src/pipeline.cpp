#include "epiflow/pipeline.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <thread>

#include "epiflow/csv.hpp"
#include "epiflow/errors.hpp"
#include "epiflow/series.hpp"

namespace epiflow::pipeline {

namespace fs = std::filesystem;
using mortality::Cause;

Stage stage_from_string(const std::string& s) {
    if (s == "reconstruct") return Stage::reconstruct;
    if (s == "measures") return Stage::measures;
    if (s == "classify") return Stage::classify;
    if (s == "instrument") return Stage::instrument;
    if (s == "regress") return Stage::regress;
    if (s == "report") return Stage::report;
    throw ValidationError("unknown stage: '" + s + "'");
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::reconstruct: return "reconstruct";
        case Stage::measures: return "measures";
        case Stage::classify: return "classify";
        case Stage::instrument: return "instrument";
        case Stage::regress: return "regress";
        case Stage::report: return "report";
    }
    return "?";
}

const ReportTable* ReportBundle::table(const std::string& name) const {
    for (const auto& t : tables) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

namespace {

// ---------------------------------------------------------------------------
// input loading
// ---------------------------------------------------------------------------

struct LineRange {
    int first = INT_MAX;
    int last = 0;
    void add(int line) {
        first = std::min(first, line);
        last = std::max(last, line);
    }
    std::string describe(const std::string& file) const {
        if (last == 0) return "";
        return fs::path(file).filename().string() + ":" + std::to_string(first) +
               "-" + std::to_string(last);
    }
};

using CityCause = std::pair<std::string, Cause>;

struct Inputs {
    std::map<CityCause, series::TimeSeries> weekly;
    std::map<CityCause, LineRange> weekly_lines;

    std::map<CityCause, std::map<int, std::array<std::optional<double>, 12>>> baseline;
    std::map<CityCause, LineRange> baseline_lines;

    std::map<std::string, mortality::PopulationEstimate> population;

    std::map<std::string, std::vector<npi::RawInterval>> npi;
    std::map<std::string, LineRange> npi_lines;

    std::vector<trade::TradeSnippet> snippets;
    std::map<std::string, LineRange> snippet_lines;

    std::vector<geo::CampRecord> camps;
    std::map<std::string, geo::LatLon> locations;

    std::map<std::string, std::map<std::string, double>> controls;
    std::vector<std::string> control_columns;

    struct ManufRow {
        std::string city;
        int year = 0;
        double employment = 0;
        double output = 0;
    };
    std::vector<ManufRow> manufacturing;
};

std::int64_t parse_month_field(const csv::Table& t, const csv::Row& row, int col) {
    const std::string& s = t.field(row, col);
    if (s.size() != 7 || s[4] != '-') {
        t.fail(row, "expected YYYY-MM month, got '" + s + "'");
    }
    int y = std::stoi(s.substr(0, 4));
    int m = std::stoi(s.substr(5, 2));
    if (m < 1 || m > 12) t.fail(row, "month out of range: '" + s + "'");
    return static_cast<std::int64_t>(y) * 12 + (m - 1);
}

void load_weekly_deaths(const std::string& path, Inputs& in) {
    csv::Table t = csv::read_file(path);
    int c_city = t.column("city_id");
    int c_cause = t.column("cause");
    int c_week = t.column("week_end_date");
    int c_deaths = t.column("deaths");

    std::map<CityCause, std::map<Date, std::optional<double>>> grouped;
    for (const auto& row : t.rows()) {
        Date end = Date::parse(t.field(row, c_week));
        if (end.weekday() != 6) {
            t.fail(row, "week_end_date " + end.to_string() + " is not a Saturday");
        }
        CityCause key{t.field(row, c_city),
                      mortality::cause_from_string(t.field(row, c_cause))};
        auto& series = grouped[key];
        if (series.count(end)) {
            t.fail(row, "duplicate week " + end.to_string() + " for " + key.first);
        }
        series[end] = t.number_optional(row, c_deaths);
        in.weekly_lines[key].add(row.line);
    }
    for (auto& [key, by_week] : grouped) {
        Date first_end = by_week.begin()->first;
        Date last_end = by_week.rbegin()->first;
        CalendarGrid grid(first_end - 6, last_end - first_end + 7);
        auto spans = grid.periods(Frequency::weekly);
        std::vector<std::optional<double>> vals(spans.size());
        for (size_t p = 0; p < spans.size(); ++p) {
            Date end = grid.date_at(spans[p].first_index + spans[p].n_days - 1);
            auto it = by_week.find(end);
            if (it != by_week.end()) vals[p] = it->second;
        }
        in.weekly.emplace(key,
                          series::TimeSeries(grid, Frequency::weekly, std::move(vals)));
    }
}

void load_monthly_baseline(const std::string& path, Inputs& in) {
    csv::Table t = csv::read_file(path);
    int c_city = t.column("city_id");
    int c_cause = t.column("cause");
    int c_month = t.column("month");
    int c_year = t.column("year");
    int c_rate = t.column("rate_per_100k");
    for (const auto& row : t.rows()) {
        long month = t.integer(row, c_month);
        if (month < 1 || month > 12) t.fail(row, "month must be 1..12");
        CityCause key{t.field(row, c_city),
                      mortality::cause_from_string(t.field(row, c_cause))};
        int year = static_cast<int>(t.integer(row, c_year));
        auto& slot = in.baseline[key][year][static_cast<size_t>(month - 1)];
        if (slot) {
            t.fail(row, "duplicate baseline rate for " + key.first + " " +
                            std::to_string(year) + "-" + std::to_string(month));
        }
        slot = t.number(row, c_rate);
        in.baseline_lines[key].add(row.line);
    }
}

void load_population(const std::string& path, Inputs& in) {
    csv::Table t = csv::read_file(path);
    int c_city = t.column("city_id");
    int c_1910 = t.column("pop_1910");
    int c_1920 = t.column("pop_1920");
    int c_deaths = t.column("pandemic_deaths");
    for (const auto& row : t.rows()) {
        mortality::PopulationEstimate p;
        p.city_id = t.field(row, c_city);
        if (in.population.count(p.city_id)) {
            t.fail(row, "duplicate population row for " + p.city_id);
        }
        p.pop_1910 = t.number(row, c_1910);
        p.pop_1920 = t.number(row, c_1920);
        p.pandemic_deaths = t.number(row, c_deaths);
        try {
            p.pop_1918 = mortality::estimate_pop_1918(p.pop_1910, p.pop_1920,
                                                      p.pandemic_deaths);
        } catch (const ValidationError& e) {
            t.fail(row, e.what());
        }
        in.population.emplace(p.city_id, std::move(p));
    }
}

void load_npi_intervals(const std::string& path, Inputs& in) {
    csv::Table t = csv::read_file(path);
    int c_city = t.column("city_id");
    int c_cat = t.column("category");
    int c_start = t.column("start_date");
    int c_end = t.column("end_date");
    for (const auto& row : t.rows()) {
        npi::RawInterval iv;
        try {
            iv.category = npi::category_from_string(t.field(row, c_cat));
        } catch (const ValidationError& e) {
            t.fail(row, e.what());
        }
        iv.start = Date::parse(t.field(row, c_start));
        iv.end = Date::parse(t.field(row, c_end));
        const std::string& city = t.field(row, c_city);
        in.npi[city].push_back(iv);
        in.npi_lines[city].add(row.line);
    }
}

void load_trade_snippets(const std::string& path, Inputs& in) {
    csv::Table t = csv::read_file(path);
    int c_city = t.column("city_id");
    int c_sector = t.column("sector");
    int c_week = t.column("week_end_date");
    int c_text = t.column("text");
    int c_strike = t.column("strike_flag");
    for (const auto& row : t.rows()) {
        trade::TradeSnippet s;
        s.city_id = t.field(row, c_city);
        try {
            s.sector = trade::sector_from_string(t.field(row, c_sector));
        } catch (const ValidationError& e) {
            t.fail(row, e.what());
        }
        s.week_end_date = Date::parse(t.field(row, c_week));
        s.text = t.field(row, c_text);
        if (s.text.empty()) t.fail(row, "empty snippet text");
        long flag = t.integer(row, c_strike);
        if (flag != 0 && flag != 1) t.fail(row, "strike_flag must be 0 or 1");
        s.remarks_mentions_strike = flag == 1;
        in.snippet_lines[s.city_id].add(row.line);
        in.snippets.push_back(std::move(s));
    }
}

void load_camps(const std::string& path, Inputs& in) {
    csv::Table t = csv::read_file(path);
    int c_id = t.column("camp_id");
    int c_lat = t.column("lat");
    int c_lon = t.column("lon");
    int c_month = t.column("month");
    int c_strength = t.column("strength");
    std::map<std::string, geo::CampRecord> by_id;
    for (const auto& row : t.rows()) {
        const std::string& id = t.field(row, c_id);
        auto& camp = by_id[id];
        camp.camp_id = id;
        camp.position = {t.number(row, c_lat), t.number(row, c_lon)};
        std::int64_t month = parse_month_field(t, row, c_month);
        double strength = t.number(row, c_strength);
        if (strength < 0) t.fail(row, "negative camp strength");
        if (camp.monthly_strength.count(month)) {
            t.fail(row, "duplicate month for camp " + id);
        }
        camp.monthly_strength[month] = strength;
    }
    for (auto& [id, camp] : by_id) {
        (void)id;
        in.camps.push_back(std::move(camp));
    }
}

void load_locations(const std::string& path, Inputs& in) {
    csv::Table t = csv::read_file(path);
    int c_id = t.column("location_id");
    int c_lat = t.column("lat");
    int c_lon = t.column("lon");
    for (const auto& row : t.rows()) {
        const std::string& id = t.field(row, c_id);
        if (in.locations.count(id)) t.fail(row, "duplicate location " + id);
        in.locations[id] = {t.number(row, c_lat), t.number(row, c_lon)};
    }
}

void load_controls(const std::string& path, Inputs& in) {
    csv::Table t = csv::read_file(path);
    int c_city = t.column("city_id");
    for (const auto& h : t.header()) {
        if (h != "city_id") in.control_columns.push_back(h);
    }
    for (const auto& row : t.rows()) {
        const std::string& city = t.field(row, c_city);
        if (in.controls.count(city)) t.fail(row, "duplicate controls row for " + city);
        auto& vals = in.controls[city];
        for (const auto& col : in.control_columns) {
            vals[col] = t.number(row, t.column(col));
        }
    }
}

void load_manufacturing(const std::string& path, Inputs& in) {
    csv::Table t = csv::read_file(path);
    int c_city = t.column("city_id");
    int c_year = t.column("year");
    int c_emp = t.column("employment");
    int c_out = t.column("output");
    for (const auto& row : t.rows()) {
        Inputs::ManufRow r;
        r.city = t.field(row, c_city);
        r.year = static_cast<int>(t.integer(row, c_year));
        r.employment = t.number(row, c_emp);
        r.output = t.number(row, c_out);
        if (r.employment <= 0 || r.output <= 0) {
            t.fail(row, "employment and output must be positive (log scale)");
        }
        in.manufacturing.push_back(std::move(r));
    }
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

std::string input_ref(const Manifest& m, const std::string& rel) {
    std::string full = m.resolve(rel);
    return fs::path(rel).filename().string() + "@" + csv::file_content_hash(full);
}

template <typename Fn>
void parallel_over(size_t count, Fn&& fn) {
    unsigned workers = std::min<unsigned>(std::thread::hardware_concurrency(),
                                          static_cast<unsigned>(count));
    if (workers <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::future<void>> futures;
    futures.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        futures.push_back(std::async(std::launch::async, [&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        }));
    }
    for (auto& f : futures) f.get();  // rethrows worker exceptions
}

std::string bool_str(bool b) { return b ? "1" : "0"; }

// ---------------------------------------------------------------------------
// reconstruct
// ---------------------------------------------------------------------------

void run_reconstruct(const Manifest& m, const Inputs& in, ReportBundle& bundle) {
    auto window = m.study_window();
    auto params = m.excess_params();

    std::vector<CityCause> keys;
    for (const auto& [key, s] : in.weekly) {
        (void)s;
        keys.push_back(key);
    }

    std::vector<std::optional<CityMortality>> results(keys.size());
    std::vector<std::string> errors(keys.size());

    parallel_over(keys.size(), [&](size_t i) {
        const auto& key = keys[i];
        const std::string& city = key.first;
        try {
            auto pop_it = in.population.find(city);
            if (pop_it == in.population.end()) {
                throw ValidationError("no population row for city '" + city + "'");
            }
            auto base_it = in.baseline.find(key);
            if (base_it == in.baseline.end()) {
                throw ValidationError("no baseline rates for city '" + city +
                                      "', cause " + mortality::to_string(key.second));
            }
            std::vector<std::array<std::optional<double>, 12>> years;
            for (const auto& [year, months] : base_it->second) {
                (void)year;
                years.push_back(months);
            }
            auto seasonal = mortality::baseline_monthly_median(years);

            auto imputed = series::impute_linear(in.weekly.at(key), m.impute_max_gap);
            auto mbdr = mortality::baseline_over(seasonal, imputed.series.grid().start,
                                                 imputed.series.grid().end());
            auto curves =
                mortality::excess_rates(city, key.second, imputed.series, mbdr,
                                        pop_it->second.pop_1918, params);
            CityMortality cm{std::move(curves), std::nullopt, "", imputed.imputed_cells};
            try {
                cm.outcomes = mortality::peak_and_cumulative(cm.curves, window);
            } catch (const ValidationError& e) {
                cm.exclusion_reason = e.what();
            }
            results[i] = std::move(cm);
        } catch (const std::exception& e) {
            errors[i] = std::string("stage reconstruct, city ") + city + " (" +
                        mortality::to_string(key.second) + "): " + e.what();
        }
    });
    for (const auto& e : errors) {
        if (!e.empty()) throw ValidationError(e);
    }
    for (auto& r : results) {
        if (r) bundle.mortality.push_back(std::move(*r));
    }

    // mortality_outcomes table
    ReportTable outcomes{"mortality_outcomes",
                         {"city_id", "cause", "acceleration_date", "peak_weekly_edr",
                          "cumulative_edr", "second_peak_flag"},
                         {}};
    for (const auto& cm : bundle.mortality) {
        if (!cm.outcomes) continue;
        const auto& o = *cm.outcomes;
        outcomes.add_row({o.city_id, mortality::to_string(o.cause),
                          o.acceleration ? o.acceleration->to_string() : "",
                          format_rate(o.peak_weekly_edr), format_rate(o.cumulative_edr),
                          bool_str(o.second_peak)});
    }
    bundle.tables.push_back(std::move(outcomes));

    // daily curve samples (series schema)
    ReportTable curves{"daily_curves", {"series_id", "period_end_date", "value"}, {}};
    for (const auto& cm : bundle.mortality) {
        const auto& c = cm.curves;
        auto emit = [&](const std::string& what, const series::TimeSeries& s) {
            std::string id = c.city_id + "/" + mortality::to_string(c.cause) + "/" + what;
            for (int p = 0; p < s.periods(); ++p) {
                const auto& v = s.values()[static_cast<size_t>(p)];
                curves.add_row({id, s.period_end(p).to_string(),
                                v ? format_number(*v, 6) : ""});
            }
        };
        emit("eddr", c.eddr);
        emit("dbdr", c.dbdr);
        emit("ewdr", c.ewdr);
    }
    bundle.tables.push_back(std::move(curves));

    std::string inputs = input_ref(m, m.weekly_deaths) + ";" +
                         input_ref(m, m.monthly_baseline) + ";" +
                         input_ref(m, m.population);
    for (const auto& cm : bundle.mortality) {
        CityCause key{cm.curves.city_id, cm.curves.cause};
        std::string rows;
        if (auto it = in.weekly_lines.find(key); it != in.weekly_lines.end()) {
            rows = it->second.describe(m.weekly_deaths);
        }
        if (auto it = in.baseline_lines.find(key); it != in.baseline_lines.end()) {
            if (!rows.empty()) rows += ";";
            rows += it->second.describe(m.monthly_baseline);
        }
        bundle.provenance.push_back(
            {"mortality_outcomes", cm.curves.city_id + ":" +
                 mortality::to_string(cm.curves.cause),
             "*", "reconstruct", inputs, rows});
        if (!cm.outcomes) {
            bundle.warnings.push_back("reconstruct: excluded " + cm.curves.city_id +
                                      " (" + mortality::to_string(cm.curves.cause) +
                                      "): " + cm.exclusion_reason);
        }
    }
    if (bundle.mortality.empty()) {
        bundle.warnings.push_back("reconstruct: no cities in " + m.weekly_deaths);
    }
}

// ---------------------------------------------------------------------------
// measures
// ---------------------------------------------------------------------------

std::map<std::string, std::optional<Date>> acceleration_by_city(
    const ReportBundle& bundle) {
    std::map<std::string, std::optional<Date>> out;
    for (const auto& cm : bundle.mortality) {
        if (cm.curves.cause != Cause::influenza_pneumonia) continue;
        if (cm.outcomes) out[cm.curves.city_id] = cm.outcomes->acceleration;
    }
    return out;
}

void run_measures(const Manifest& m, const Inputs& in, ReportBundle& bundle) {
    auto window = m.study_window();
    auto accel = acceleration_by_city(bundle);

    for (const auto& [city, raw] : in.npi) {
        auto rec = npi::normalize(city, raw, window.start, window.end());
        npi::NpiMeasures meas;
        meas.city_id = city;
        meas.intensity = npi::npi_intensity(rec);
        meas.intensity_exclusive = npi::npi_intensity_exclusive(rec);
        auto it = accel.find(city);
        if (it != accel.end() && it->second && rec.first_response_date) {
            meas.speed = npi::npi_speed(rec, *it->second);
        }
        bundle.npi_measures.push_back(std::move(meas));
    }

    int with_speed = 0;
    for (const auto& meas : bundle.npi_measures) {
        if (meas.speed) ++with_speed;
    }
    if (with_speed >= 2) {
        auto res = npi::classify_high_npi(bundle.npi_measures);
        if (res.degenerate) {
            bundle.warnings.push_back(
                "measures: all cities identical; nobody classified high-NPI");
        }
        bundle.npi_medians = res;
    } else if (!bundle.npi_measures.empty()) {
        bundle.warnings.push_back(
            "measures: fewer than 2 cities with NPI speed; high-NPI flag not set");
    } else if (!m.npi_intervals.empty()) {
        bundle.warnings.push_back("measures: no cities in " + m.npi_intervals);
    }

    ReportTable t{"npi_measures",
                  {"city_id", "intensity", "speed", "high_npi"},
                  {}};
    std::string inputs = input_ref(m, m.npi_intervals);
    for (const auto& meas : bundle.npi_measures) {
        t.add_row({meas.city_id, format_int(meas.intensity),
                   meas.speed ? format_int(*meas.speed) : "",
                   meas.high_npi ? bool_str(*meas.high_npi) : ""});
        std::string rows;
        if (auto it = in.npi_lines.find(meas.city_id); it != in.npi_lines.end()) {
            rows = it->second.describe(m.npi_intervals);
        }
        rows += ";acceleration:derived-from-stage-reconstruct";
        bundle.provenance.push_back(
            {"npi_measures", meas.city_id, "*", "measures", inputs, rows});
    }
    bundle.tables.push_back(std::move(t));

    // medians and sample membership sidecar
    ReportTable med{"npi_medians", {"key", "value"}, {}};
    if (bundle.npi_medians) {
        med.add_row({"median_intensity", format_number(bundle.npi_medians->median_intensity, 1)});
        med.add_row({"median_speed", format_number(bundle.npi_medians->median_speed, 1)});
        med.add_row({"n_high", format_int(bundle.npi_medians->n_high)});
        med.add_row({"n_low", format_int(bundle.npi_medians->n_low)});
        std::string sample;
        for (const auto& meas : bundle.npi_measures) {
            if (!meas.speed) continue;
            if (!sample.empty()) sample += " ";
            sample += meas.city_id;
        }
        med.add_row({"sample", sample});
    }
    bundle.tables.push_back(std::move(med));
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

void run_classify(const Manifest& m, const Inputs& in, ReportBundle& bundle) {
    bundle.trade = trade::build_table(in.snippets, m.min_trade_obs);

    ReportTable t{"trade_monthly",
                  {"city_id", "month", "wholesale", "retail", "manufacturing",
                   "combined", "n_obs"},
                  {}};
    ReportTable levels{"trade_monthly_levels",
                       {"city_id", "month", "wholesale", "retail", "manufacturing",
                        "combined", "n_obs"},
                       {}};
    auto opt_rate = [](const std::optional<double>& v) {
        return v ? format_rate(*v) : "";
    };
    auto opt_level = [](const std::optional<double>& v) {
        return v ? format_number(*v, 2) : "";
    };
    std::string inputs = input_ref(m, m.trade_snippets);
    std::set<std::string> seen;
    for (const auto& r : bundle.trade.rows) {
        std::string month = trade::month_key_to_string(r.month);
        t.add_row({r.city_id, month, opt_rate(r.wholesale), opt_rate(r.retail),
                   opt_rate(r.manufacturing), opt_rate(r.combined),
                   format_int(r.n_obs)});
        levels.add_row({r.city_id, month, opt_level(r.wholesale_level),
                        opt_level(r.retail_level), opt_level(r.manufacturing_level),
                        opt_level(r.combined_level), format_int(r.n_obs)});
        if (seen.insert(r.city_id).second) {
            std::string rows;
            if (auto it = in.snippet_lines.find(r.city_id);
                it != in.snippet_lines.end()) {
                rows = it->second.describe(m.trade_snippets);
            }
            bundle.provenance.push_back(
                {"trade_monthly", r.city_id, "*", "classify", inputs, rows});
        }
    }
    for (const auto& city : bundle.trade.excluded_cities) {
        bundle.warnings.push_back("classify: excluded " + city +
                                  " (fewer than " + std::to_string(m.min_trade_obs) +
                                  " classified observations)");
    }
    if (bundle.trade.rows.empty() && !m.trade_snippets.empty()) {
        bundle.warnings.push_back("classify: no usable snippets in " +
                                  m.trade_snippets);
    }
    bundle.tables.push_back(std::move(t));
    bundle.tables.push_back(std::move(levels));
}

// ---------------------------------------------------------------------------
// instrument
// ---------------------------------------------------------------------------

void run_instrument(const Manifest& m, const Inputs& in, ReportBundle& bundle) {
    std::vector<geo::CampExposure> exposures;
    for (const auto& camp : in.camps) {
        geo::CampExposure e;
        e.camp_id = camp.camp_id;
        e.position = camp.position;
        e.strength = geo::camp_strength(camp, m.camp_window_first, m.camp_window_last);
        exposures.push_back(std::move(e));
    }

    geo::InstrumentDiagnostics diag;
    for (const auto& [id, pos] : in.locations) {
        bundle.instrument.push_back(geo::instrument_z(id, pos, exposures, &diag));
    }
    std::set<std::string> warned(diag.zero_strength_camps.begin(),
                                 diag.zero_strength_camps.end());
    for (const auto& camp : warned) {
        bundle.warnings.push_back("instrument: camp '" + camp +
                                  "' has zero strength; excluded");
    }

    ReportTable t{"instrument", {"location_id", "z"}, {}};
    std::string inputs = input_ref(m, m.camps) + ";" + input_ref(m, m.locations);
    for (const auto& z : bundle.instrument) {
        t.add_row({z.location_id, format_number(z.z, 6)});
        bundle.provenance.push_back(
            {"instrument", z.location_id, "*", "instrument", inputs,
             "unit:km;radius_km:6371.0088"});
    }
    bundle.tables.push_back(std::move(t));
}

// ---------------------------------------------------------------------------
// regress
// ---------------------------------------------------------------------------

struct CityRow {
    std::map<std::string, double> values;  // outcome/treatment/instrument columns
    std::map<std::string, double> controls;
};

std::map<std::string, CityRow> build_city_frame(const ReportBundle& bundle) {
    std::map<std::string, CityRow> frame;
    for (const auto& cm : bundle.mortality) {
        if (!cm.outcomes) continue;
        auto& row = frame[cm.curves.city_id];
        std::string suffix =
            cm.curves.cause == Cause::influenza_pneumonia ? "ip" : "allcause";
        row.values["peak_" + suffix] = cm.outcomes->peak_weekly_edr;
        row.values["cum_" + suffix] = cm.outcomes->cumulative_edr;
    }
    for (const auto& meas : bundle.npi_measures) {
        auto& row = frame[meas.city_id];
        row.values["intensity"] = meas.intensity;
        if (meas.speed) row.values["speed"] = *meas.speed;
        if (meas.high_npi) row.values["high_npi"] = *meas.high_npi ? 1.0 : 0.0;
    }
    for (const auto& z : bundle.instrument) {
        frame[z.location_id].values["z"] = z.z;
    }
    for (const auto& [city, cols] : bundle.city_controls) {
        frame[city].controls = cols;
    }
    // manufacturing log growth over the pandemic census gap
    std::map<std::string, std::map<int, double>> emp;
    for (const auto& r : bundle.manufacturing_rows) {
        emp[r.city_id][r.year] = r.employment;
    }
    for (const auto& [city, by_year] : emp) {
        auto pre = by_year.find(1914);
        auto post = by_year.find(1919);
        if (pre != by_year.end() && post != by_year.end()) {
            frame[city].values["log_emp_growth_1914_1919"] =
                std::log(post->second) - std::log(pre->second);
        }
    }
    return frame;
}

struct SpecColumn {
    std::string treatment;
    std::string controls_label;
    std::string estimate, se, n, r2, oster;
};

ReportTable spec_table(const std::string& name, const std::vector<SpecColumn>& cols) {
    ReportTable t{name, {"stat"}, {}};
    for (size_t i = 0; i < cols.size(); ++i) {
        t.columns.push_back("(" + std::to_string(i + 1) + ")");
    }
    auto row = [&](const std::string& label, auto getter) {
        std::vector<std::string> r{label};
        for (const auto& c : cols) r.push_back(getter(c));
        t.add_row(std::move(r));
    };
    row("treatment", [](const SpecColumn& c) { return c.treatment; });
    row("controls", [](const SpecColumn& c) { return c.controls_label; });
    row("estimate", [](const SpecColumn& c) { return c.estimate; });
    row("se", [](const SpecColumn& c) { return c.se; });
    row("n", [](const SpecColumn& c) { return c.n; });
    row("r2", [](const SpecColumn& c) { return c.r2; });
    row("oster_beta_star", [](const SpecColumn& c) { return c.oster; });
    return t;
}

const std::vector<std::string>& control_set(const Manifest& m,
                                            const std::string& label) {
    static const std::vector<std::string> none;
    if (label == "none") return none;
    if (label == "baseline") return m.controls_baseline;
    return m.controls_extended;
}

// Cross-section OLS of one outcome on one treatment plus controls (HC1),
// with the Oster bound for controlled specifications.
SpecColumn cross_section_spec(const Manifest& m,
                              const std::map<std::string, CityRow>& frame,
                              const std::string& outcome,
                              const std::string& treatment,
                              const std::string& controls_label,
                              std::vector<std::string>* warnings) {
    SpecColumn col;
    col.treatment = treatment;
    col.controls_label = controls_label;

    const auto& controls = control_set(m, controls_label);
    std::vector<std::string> cities;
    for (const auto& [city, row] : frame) {
        if (!row.values.count(outcome) || !row.values.count(treatment)) continue;
        bool ok = true;
        for (const auto& c : controls) {
            if (!row.controls.count(c)) {
                ok = false;
                break;
            }
        }
        if (ok) cities.push_back(city);
    }
    int n = static_cast<int>(cities.size());
    int k = 2 + static_cast<int>(controls.size());
    if (n <= k) {
        if (warnings) {
            warnings->push_back("regress: skipped " + outcome + " ~ " + treatment +
                                " [" + controls_label + "]: only " +
                                std::to_string(n) + " cities for " +
                                std::to_string(k) + " parameters");
        }
        return col;
    }

    Eigen::VectorXd y(n);
    Eigen::MatrixXd X(n, k);
    std::vector<std::string> names{"intercept", treatment};
    for (const auto& c : controls) names.push_back(c);
    for (int i = 0; i < n; ++i) {
        const auto& row = frame.at(cities[static_cast<size_t>(i)]);
        y(i) = row.values.at(outcome);
        X(i, 0) = 1.0;
        X(i, 1) = row.values.at(treatment);
        for (size_t j = 0; j < controls.size(); ++j) {
            X(i, 2 + static_cast<int>(j)) = row.controls.at(controls[j]);
        }
    }

    try {
        econ::OlsOptions opts;
        opts.cov = m.cross_section_cov;
        auto fit = econ::ols_fit(y, X, names, opts);
        col.estimate = format_coef(fit.coef(1));
        col.se = "(" + format_coef(fit.se(1)) + ")";
        col.n = format_int(fit.n_obs);
        col.r2 = format_number(fit.r2, 3);
        if (!controls.empty()) {
            auto base = econ::ols_fit(y, X.leftCols(2), {"intercept", treatment}, opts);
            try {
                auto bound = econ::oster_bound(base.coef(1), base.r2, fit.coef(1), fit.r2);
                col.oster = format_coef(bound.beta_star);
            } catch (const EstimationError& e) {
                if (warnings) {
                    warnings->push_back(std::string("regress: oster bound undefined for ") +
                                        outcome + " ~ " + treatment + " [" +
                                        controls_label + "]: " + e.what());
                }
            }
        }
    } catch (const EstimationError& e) {
        if (warnings) {
            warnings->push_back("regress: " + outcome + " ~ " + treatment + " [" +
                                controls_label + "] failed: " + e.what());
        }
    }
    return col;
}

// Monthly trade panel within the DiD window for one treatment.
std::optional<econ::PanelData> build_trade_panel(
    const Manifest& m, const ReportBundle& bundle,
    const std::map<std::string, CityRow>& frame, const std::string& treatment,
    const std::vector<std::string>& controls) {
    std::vector<std::tuple<std::string, std::int64_t, double>> rows;
    for (const auto& r : bundle.trade.rows) {
        if (r.month < m.did_start || r.month > m.did_end) continue;
        if (!r.combined) continue;
        auto it = frame.find(r.city_id);
        if (it == frame.end() || !it->second.values.count(treatment)) continue;
        bool ok = true;
        for (const auto& c : controls) {
            if (!it->second.controls.count(c)) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        rows.emplace_back(r.city_id, r.month, *r.combined);
    }
    if (rows.size() < 8) return std::nullopt;

    std::map<std::string, int> unit_ids;
    std::map<std::int64_t, int> time_ids;
    for (const auto& [city, month, v] : rows) {
        (void)v;
        unit_ids.emplace(city, 0);
        time_ids.emplace(month, 0);
    }
    if (unit_ids.size() < 2 || time_ids.size() < 2) return std::nullopt;
    int next = 0;
    for (auto& [city, id] : unit_ids) {
        (void)city;
        id = next++;
    }
    next = 0;
    std::vector<std::int64_t> time_values;
    for (auto& [month, id] : time_ids) {
        id = next++;
        time_values.push_back(month);
    }

    econ::PanelData panel;
    panel.time_value = time_values;
    int n = static_cast<int>(rows.size());
    panel.outcome.resize(n);
    panel.treatment.resize(n);
    panel.controls.resize(n, static_cast<int>(controls.size()));
    panel.control_names = controls;
    panel.treatment_name = treatment;
    for (int i = 0; i < n; ++i) {
        const auto& [city, month, v] = rows[static_cast<size_t>(i)];
        panel.unit.push_back(unit_ids.at(city));
        panel.time.push_back(time_ids.at(month));
        panel.outcome(i) = v;
        const auto& row = frame.at(city);
        panel.treatment(i) = row.values.at(treatment);
        for (size_t j = 0; j < controls.size(); ++j) {
            panel.controls(i, static_cast<int>(j)) = row.controls.at(controls[j]);
        }
    }
    return panel;
}

// Census-year manufacturing panel for one outcome ("employment"/"output").
std::optional<econ::PanelData> build_manuf_panel(
    const ReportBundle& bundle, const std::map<std::string, CityRow>& frame,
    const std::string& outcome, const std::string& treatment,
    const std::vector<std::string>& controls) {
    std::vector<std::tuple<std::string, int, double>> rows;
    for (const auto& r : bundle.manufacturing_rows) {
        auto it = frame.find(r.city_id);
        if (it == frame.end() || !it->second.values.count(treatment)) continue;
        bool ok = true;
        for (const auto& c : controls) {
            if (!it->second.controls.count(c)) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        double v = outcome == "employment" ? r.employment : r.output;
        rows.emplace_back(r.city_id, r.year, std::log(v));
    }
    if (rows.size() < 8) return std::nullopt;

    std::map<std::string, int> unit_ids;
    std::map<int, int> time_ids;
    for (const auto& [city, year, v] : rows) {
        (void)v;
        unit_ids.emplace(city, 0);
        time_ids.emplace(year, 0);
    }
    if (unit_ids.size() < 2 || time_ids.size() < 2) return std::nullopt;
    int next = 0;
    for (auto& [city, id] : unit_ids) {
        (void)city;
        id = next++;
    }
    next = 0;
    std::vector<std::int64_t> time_values;
    for (auto& [year, id] : time_ids) {
        id = next++;
        time_values.push_back(year);
    }

    econ::PanelData panel;
    panel.time_value = time_values;
    int n = static_cast<int>(rows.size());
    panel.outcome.resize(n);
    panel.treatment.resize(n);
    panel.controls.resize(n, static_cast<int>(controls.size()));
    panel.control_names = controls;
    panel.treatment_name = treatment;
    for (int i = 0; i < n; ++i) {
        const auto& [city, year, v] = rows[static_cast<size_t>(i)];
        panel.unit.push_back(unit_ids.at(city));
        panel.time.push_back(time_ids.at(year));
        panel.outcome(i) = v;
        const auto& row = frame.at(city);
        panel.treatment(i) = row.values.at(treatment);
        for (size_t j = 0; j < controls.size(); ++j) {
            panel.controls(i, static_cast<int>(j)) = row.controls.at(controls[j]);
        }
    }
    return panel;
}

SpecColumn did_spec_column(const Manifest& m, const std::string& treatment,
                           const std::string& controls_label,
                           std::optional<econ::PanelData> panel,
                           std::int64_t post_from,
                           std::vector<std::string>* warnings) {
    SpecColumn col;
    col.treatment = treatment;
    col.controls_label = controls_label;
    if (!panel) {
        if (warnings) {
            warnings->push_back("regress: DiD skipped for " + treatment + " [" +
                                controls_label + "]: too few rows");
        }
        return col;
    }
    try {
        econ::DidSpec spec;
        spec.post_from = post_from;
        spec.cov = m.panel_cov;
        auto fit = econ::did_estimate(*panel, spec);
        int idx = fit.term_index(treatment + "_x_post");
        col.estimate = format_coef(fit.coef(idx));
        col.se = "(" + format_coef(fit.se(idx)) + ")";
        col.n = format_int(fit.n_obs);
        col.r2 = format_number(fit.r2, 3);
    } catch (const EstimationError& e) {
        if (warnings) {
            warnings->push_back("regress: DiD " + treatment + " [" + controls_label +
                                "] failed: " + e.what());
        }
    }
    return col;
}

void run_regress(const Manifest& m, const Inputs& in, ReportBundle& bundle) {
    (void)in;
    auto frame = build_city_frame(bundle);

    std::string inputs;
    for (const auto& f : {m.weekly_deaths, m.monthly_baseline, m.population,
                          m.npi_intervals, m.trade_snippets, m.controls,
                          m.manufacturing, m.camps, m.locations}) {
        if (f.empty()) continue;
        if (!inputs.empty()) inputs += ";";
        inputs += input_ref(m, f);
    }
    auto table_provenance = [&](const std::string& name) {
        bundle.provenance.push_back({name, "*", "*", "regress", inputs, ""});
    };

    const std::vector<std::string> treatments{"intensity", "speed", "high_npi"};
    const std::vector<std::string> cs_controls{"none", "baseline", "extended"};

    // cross-sectional mortality tables (panels of the first two tables)
    bool have_mortality = false;
    for (const auto& [city, row] : frame) {
        (void)city;
        if (row.values.count("peak_ip") || row.values.count("peak_allcause")) {
            have_mortality = true;
            break;
        }
    }
    if (have_mortality && !bundle.npi_measures.empty()) {
        const std::vector<std::pair<std::string, std::string>> outcomes{
            {"table1_peak_ip", "peak_ip"},
            {"table1_cum_ip", "cum_ip"},
            {"table2_peak_allcause", "peak_allcause"},
            {"table2_cum_allcause", "cum_allcause"}};
        for (const auto& [table_name, outcome] : outcomes) {
            std::vector<SpecColumn> cols;
            for (const auto& treatment : treatments) {
                for (const auto& label : cs_controls) {
                    cols.push_back(cross_section_spec(m, frame, outcome, treatment,
                                                      label, &bundle.warnings));
                }
            }
            bundle.tables.push_back(spec_table(table_name, cols));
            table_provenance(table_name);
        }
    }

    // trade DiD table
    if (!bundle.trade.rows.empty() && !bundle.npi_measures.empty()) {
        std::vector<SpecColumn> cols;
        for (const auto& treatment : treatments) {
            for (const std::string label : {"none", "baseline"}) {
                cols.push_back(did_spec_column(
                    m, treatment, label,
                    build_trade_panel(m, bundle, frame, treatment,
                                      control_set(m, label)),
                    m.post_from, &bundle.warnings));
            }
        }
        bundle.tables.push_back(spec_table("table3_trade_did", cols));
        table_provenance("table3_trade_did");
    }

    // manufacturing DiD tables; Post = first census year after the pandemic
    const std::int64_t manuf_post_year = 1919;
    if (!bundle.manufacturing_rows.empty() && !bundle.npi_measures.empty()) {
        for (const std::string outcome : {"employment", "output"}) {
            std::vector<SpecColumn> cols;
            for (const auto& treatment : treatments) {
                for (const std::string label : {"none", "baseline"}) {
                    cols.push_back(did_spec_column(
                        m, treatment, label,
                        build_manuf_panel(bundle, frame, outcome, treatment,
                                          control_set(m, label)),
                        manuf_post_year, &bundle.warnings));
                }
            }
            std::string name = outcome == "employment" ? "table4_manuf_employment"
                                                       : "table4_manuf_output";
            bundle.tables.push_back(spec_table(name, cols));
            table_provenance(name);
        }

        // event-study coefficient paths on log employment
        ReportTable ev{"event_study_employment",
                       {"treatment", "controls", "year", "estimate", "se",
                        "ci95_lo", "ci95_hi"},
                       {}};
        for (const std::string treatment : {"intensity", "high_npi"}) {
            for (const std::string label : {"none", "baseline"}) {
                auto panel = build_manuf_panel(bundle, frame, "employment", treatment,
                                               control_set(m, label));
                if (!panel) continue;
                try {
                    econ::EventStudySpec spec;
                    spec.base_period = m.base_year;
                    spec.cov = m.panel_cov;
                    auto res = econ::event_study(*panel, spec);
                    for (size_t p = 0; p < res.periods.size(); ++p) {
                        int idx = res.coef_index[p];
                        auto ci = res.fit.confidence_interval(idx, 0.95);
                        ev.add_row({treatment, label, std::to_string(res.periods[p]),
                                    format_coef(res.fit.coef(idx)),
                                    format_coef(res.fit.se(idx)),
                                    format_coef(ci.first), format_coef(ci.second)});
                    }
                } catch (const EstimationError& e) {
                    bundle.warnings.push_back("regress: event study " + treatment +
                                              " [" + label + "] failed: " + e.what());
                }
            }
        }
        bundle.tables.push_back(std::move(ev));
        table_provenance("event_study_employment");
    }

    // IV diagnostics: 1918 mortality instrumented by camp exposure
    bool have_z = false, have_growth = false;
    for (const auto& [city, row] : frame) {
        (void)city;
        if (row.values.count("z")) have_z = true;
        if (row.values.count("log_emp_growth_1914_1919")) have_growth = true;
    }
    if (have_z && have_growth && have_mortality) {
        ReportTable iv{"table_iv",
                       {"stat", "no_controls", "baseline_controls"},
                       {}};
        std::array<std::string, 2> labels{"none", "baseline"};
        std::array<std::string, 5> stat_names{"first_stage_f", "estimate", "se", "n",
                                              "r2"};
        std::map<std::string, std::array<std::string, 2>> cells;
        for (size_t li = 0; li < labels.size(); ++li) {
            const auto& controls = control_set(m, labels[li]);
            std::vector<std::string> cities;
            for (const auto& [city, row] : frame) {
                if (!row.values.count("z") || !row.values.count("cum_ip")) continue;
                if (!row.values.count("log_emp_growth_1914_1919")) continue;
                bool ok = true;
                for (const auto& c : controls) {
                    if (!row.controls.count(c)) {
                        ok = false;
                        break;
                    }
                }
                if (ok) cities.push_back(city);
            }
            int n = static_cast<int>(cities.size());
            if (n <= static_cast<int>(controls.size()) + 2) continue;
            Eigen::VectorXd y(n), endog(n), instr(n);
            Eigen::MatrixXd exog(n, 1 + static_cast<int>(controls.size()));
            std::vector<std::string> exog_names{"intercept"};
            for (const auto& c : controls) exog_names.push_back(c);
            for (int i = 0; i < n; ++i) {
                const auto& row = frame.at(cities[static_cast<size_t>(i)]);
                y(i) = row.values.at("log_emp_growth_1914_1919");
                endog(i) = row.values.at("cum_ip");
                instr(i) = row.values.at("z");
                exog(i, 0) = 1.0;
                for (size_t j = 0; j < controls.size(); ++j) {
                    exog(i, 1 + static_cast<int>(j)) = row.controls.at(controls[j]);
                }
            }
            try {
                econ::OlsOptions opts;
                opts.cov = m.cross_section_cov;
                auto res = econ::tsls_fit(y, endog, instr, exog, exog_names,
                                          "mortality_1918", "camp_exposure_z", opts);
                cells["first_stage_f"][li] = format_number(res.first_stage_f, 1);
                cells["estimate"][li] = format_coef(res.second_stage.coef(0));
                cells["se"][li] = "(" + format_coef(res.second_stage.se(0)) + ")";
                cells["n"][li] = format_int(res.second_stage.n_obs);
                cells["r2"][li] = format_number(res.second_stage.r2, 3);
            } catch (const EstimationError& e) {
                bundle.warnings.push_back(std::string("regress: IV [") + labels[li] +
                                          "] failed: " + e.what());
            }
        }
        for (const auto& stat : stat_names) {
            iv.add_row({stat, cells[stat][0], cells[stat][1]});
        }
        bundle.tables.push_back(std::move(iv));
        table_provenance("table_iv");
    }
}

// ---------------------------------------------------------------------------
// report assembly
// ---------------------------------------------------------------------------

void run_report_assembly(const Manifest& m, const Inputs& in, ReportBundle& bundle) {
    (void)in;
    // aligned group curves (figure data)
    std::map<std::string, bool> high;
    for (const auto& meas : bundle.npi_measures) {
        if (meas.high_npi) high[meas.city_id] = *meas.high_npi;
    }
    std::vector<const mortality::MortalityCurves*> curves;
    std::map<std::string, std::optional<Date>> accel;
    for (const auto& cm : bundle.mortality) {
        if (cm.curves.cause != Cause::influenza_pneumonia || !cm.outcomes) continue;
        curves.push_back(&cm.curves);
        accel[cm.curves.city_id] = cm.outcomes->acceleration;
    }
    if (!curves.empty() && !high.empty()) {
        bundle.group_curves = mortality::align_and_average(curves, accel, high);
        ReportTable t{"group_curves",
                      {"group", "days_since_acceleration", "weeks_since_acceleration",
                       "mean_eddr", "n_cities"},
                      {}};
        auto emit = [&](const std::string& group, const std::vector<double>& mean,
                        const std::vector<int>& n) {
            for (size_t off = 0; off < mean.size(); ++off) {
                t.add_row({group, format_int(static_cast<long>(off)),
                           format_number(static_cast<double>(off) / 7.0, 4),
                           n[off] > 0 ? format_number(mean[off], 4) : "",
                           format_int(n[off])});
            }
        };
        emit("high_npi", bundle.group_curves->high_mean, bundle.group_curves->high_n);
        emit("low_npi", bundle.group_curves->low_mean, bundle.group_curves->low_n);
        bundle.tables.push_back(std::move(t));
        bundle.provenance.push_back({"group_curves", "*", "*", "report",
                                     "derived:reconstruct;derived:measures", ""});
        for (const auto& city : bundle.group_curves->excluded_cities) {
            bundle.warnings.push_back("report: group curves exclude " + city +
                                      " (no acceleration date or no NPI group)");
        }
    }

    // diagnostics table
    ReportTable diag{"diagnostics", {"category", "key", "value"}, {}};
    for (const auto& cm : bundle.mortality) {
        std::string key =
            cm.curves.city_id + ":" + mortality::to_string(cm.curves.cause);
        if (cm.imputed_cells > 0) {
            diag.add_row({"imputed_cells", key, format_int(cm.imputed_cells)});
        }
        if (cm.curves.negative_smoothed_days > 0) {
            diag.add_row({"negative_smoothed_days", key,
                          format_int(cm.curves.negative_smoothed_days)});
        }
        if (!cm.outcomes) {
            diag.add_row({"excluded_city", key, cm.exclusion_reason});
        }
    }
    for (const auto& meas : bundle.npi_measures) {
        // day counting is inclusive; the end-exclusive count rides along
        diag.add_row({"npi_intensity_exclusive", meas.city_id,
                      format_int(meas.intensity_exclusive)});
    }
    for (const auto& city : bundle.trade.excluded_cities) {
        diag.add_row({"trade_excluded_city", city, "below minimum observations"});
    }
    if (bundle.trade.strike_excluded > 0) {
        diag.add_row({"trade_strike_excluded", "*",
                      format_int(bundle.trade.strike_excluded)});
    }
    if (bundle.trade.unclassified > 0) {
        diag.add_row({"trade_unclassified", "*", format_int(bundle.trade.unclassified)});
    }
    for (const auto& w : bundle.warnings) {
        diag.add_row({"warning", "*", w});
    }
    bundle.tables.push_back(std::move(diag));
    (void)m;
}

// ---------------------------------------------------------------------------
// cache keys
// ---------------------------------------------------------------------------

std::string stage_cache_key(const Manifest& m, Stage s) {
    std::ostringstream params;
    auto file = [&](const std::string& rel) {
        if (rel.empty()) return;
        params << rel << "@" << csv::file_content_hash(m.resolve(rel)) << ";";
    };
    switch (s) {
        case Stage::reconstruct:
            params << "scale=" << m.scale << ";win=" << m.window_start.to_string()
                   << "+" << m.window_weeks << ";bw=" << m.weekly_bandwidth << ","
                   << m.monthly_bandwidth << ";gap=" << m.impute_max_gap << ";";
            file(m.weekly_deaths);
            file(m.monthly_baseline);
            file(m.population);
            break;
        case Stage::measures:
            params << stage_cache_key(m, Stage::reconstruct) << ";";
            file(m.npi_intervals);
            break;
        case Stage::classify:
            params << "minobs=" << m.min_trade_obs << ";";
            file(m.trade_snippets);
            break;
        case Stage::instrument:
            params << "campwin=" << m.camp_window_first << "-" << m.camp_window_last
                   << ";";
            file(m.camps);
            file(m.locations);
            break;
        case Stage::regress:
            params << stage_cache_key(m, Stage::measures) << ";"
                   << stage_cache_key(m, Stage::classify) << ";"
                   << stage_cache_key(m, Stage::instrument) << ";did="
                   << m.did_start << "-" << m.did_end << ";post=" << m.post_from
                   << ";base=" << m.base_year << ";cov="
                   << econ::to_string(m.cross_section_cov) << ","
                   << econ::to_string(m.panel_cov) << ";cb=";
            for (const auto& c : m.controls_baseline) params << c << ",";
            params << ";ce=";
            for (const auto& c : m.controls_extended) params << c << ",";
            params << ";";
            file(m.controls);
            file(m.manufacturing);
            break;
        case Stage::report:
            params << stage_cache_key(m, Stage::regress) << ";";
            break;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(csv::fnv1a(params.str())));
    return buf;
}

const std::map<std::string, Stage>& table_stage_map() {
    static const std::map<std::string, Stage> m = {
        {"mortality_outcomes", Stage::reconstruct},
        {"daily_curves", Stage::reconstruct},
        {"npi_measures", Stage::measures},
        {"npi_medians", Stage::measures},
        {"trade_monthly", Stage::classify},
        {"trade_monthly_levels", Stage::classify},
        {"instrument", Stage::instrument},
        {"table1_peak_ip", Stage::regress},
        {"table1_cum_ip", Stage::regress},
        {"table2_peak_allcause", Stage::regress},
        {"table2_cum_allcause", Stage::regress},
        {"table3_trade_did", Stage::regress},
        {"table4_manuf_employment", Stage::regress},
        {"table4_manuf_output", Stage::regress},
        {"event_study_employment", Stage::regress},
        {"table_iv", Stage::regress},
        {"group_curves", Stage::report},
        {"diagnostics", Stage::report},
    };
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// public entry points
// ---------------------------------------------------------------------------

ReportBundle run_pipeline(const Manifest& m, Stage upto) {
    Inputs in;
    auto want = [&](Stage s) { return static_cast<int>(s) <= static_cast<int>(upto); };

    bool mortality_inputs = !m.weekly_deaths.empty() && !m.monthly_baseline.empty() &&
                            !m.population.empty();
    if (mortality_inputs) {
        load_weekly_deaths(m.resolve(m.weekly_deaths), in);
        load_monthly_baseline(m.resolve(m.monthly_baseline), in);
        load_population(m.resolve(m.population), in);
    }
    if (!m.npi_intervals.empty()) load_npi_intervals(m.resolve(m.npi_intervals), in);
    if (!m.trade_snippets.empty()) load_trade_snippets(m.resolve(m.trade_snippets), in);
    if (!m.camps.empty() && !m.locations.empty()) {
        load_camps(m.resolve(m.camps), in);
        load_locations(m.resolve(m.locations), in);
    }
    if (!m.controls.empty()) load_controls(m.resolve(m.controls), in);
    if (!m.manufacturing.empty()) load_manufacturing(m.resolve(m.manufacturing), in);

    ReportBundle bundle;
    bundle.city_controls = in.controls;
    for (const auto& r : in.manufacturing) {
        bundle.manufacturing_rows.push_back(
            ManufacturingRow{r.city, r.year, r.employment, r.output});
    }
    if (mortality_inputs) {
        run_reconstruct(m, in, bundle);
    } else if (!m.weekly_deaths.empty() || !m.monthly_baseline.empty()) {
        bundle.warnings.push_back(
            "reconstruct: skipped (needs weekly_deaths, monthly_baseline and "
            "population)");
    }
    if (want(Stage::measures) && !m.npi_intervals.empty()) {
        run_measures(m, in, bundle);
    }
    if (want(Stage::classify) && !m.trade_snippets.empty()) {
        run_classify(m, in, bundle);
    }
    if (want(Stage::instrument) && !in.camps.empty()) {
        run_instrument(m, in, bundle);
    }
    if (want(Stage::regress)) {
        run_regress(m, in, bundle);
    }
    if (want(Stage::report)) {
        run_report_assembly(m, in, bundle);
    }
    return bundle;
}

EmitSummary emit_report(const ReportBundle& bundle, const Manifest& m, bool markdown) {
    EmitSummary summary;
    fs::path out(m.output_dir.empty() ? "out" : m.output_dir);
    if (!out.is_absolute()) {
        out = fs::path(m.path).parent_path() / out;
    }
    fs::create_directories(out);
    fs::path cache_dir = out / ".cache";
    fs::create_directories(cache_dir);

    // group tables by owning stage, then write stages whose inputs changed
    std::map<Stage, std::vector<const ReportTable*>> by_stage;
    for (const auto& t : bundle.tables) {
        auto it = table_stage_map().find(t.name);
        Stage s = it != table_stage_map().end() ? it->second : Stage::report;
        by_stage[s].push_back(&t);
    }

    for (const auto& [stage, tables] : by_stage) {
        std::string key = stage_cache_key(m, stage);
        fs::path marker = cache_dir / (to_string(stage) + ".key");
        bool hit = false;
        if (fs::exists(marker)) {
            std::ifstream mk(marker);
            std::string prev((std::istreambuf_iterator<char>(mk)),
                             std::istreambuf_iterator<char>());
            hit = prev == key;
            for (const auto* t : tables) {
                if (!fs::exists(out / (t->name + ".csv"))) hit = false;
            }
        }
        summary.stage_cache_hit[to_string(stage)] = hit;
        if (hit) continue;
        for (const auto* t : tables) {
            write_table_csv(*t, out.string());
            summary.files_written.push_back((out / (t->name + ".csv")).string());
        }
        std::ofstream mk(marker, std::ios::binary | std::ios::trunc);
        mk << key;
    }

    write_provenance(bundle.provenance, out.string());
    summary.files_written.push_back((out / "provenance.csv").string());
    if (markdown) {
        std::string md = (out / "report.md").string();
        write_tables_markdown(bundle.tables, md);
        summary.files_written.push_back(md);
    }
    return summary;
}

std::string explain_cell(const Manifest& m, const std::string& report,
                         const std::string& row_key, const std::string& column) {
    fs::path out(m.output_dir.empty() ? "out" : m.output_dir);
    if (!out.is_absolute()) out = fs::path(m.path).parent_path() / out;
    fs::path prov = out / "provenance.csv";
    if (!fs::exists(prov)) {
        throw ValidationError("no provenance record at " + prov.string() +
                              "; run the report stage first");
    }
    csv::Table t = csv::read_file(prov.string());
    int c_report = t.column("report");
    int c_row = t.column("row_key");
    int c_col = t.column("column");
    int c_stage = t.column("stage");
    int c_inputs = t.column("inputs");
    int c_rows = t.column("input_rows");

    for (const auto& row : t.rows()) {
        if (t.field(row, c_report) != report) continue;
        const std::string& rk = t.field(row, c_row);
        if (rk != "*" && rk != row_key) continue;
        const std::string& ck = t.field(row, c_col);
        if (ck != "*" && ck != column) continue;
        std::ostringstream os;
        os << "cell " << report << "[" << row_key << ", " << column << "]\n"
           << "  stage:  " << t.field(row, c_stage) << "\n"
           << "  inputs: " << t.field(row, c_inputs) << "\n";
        if (!t.field(row, c_rows).empty()) {
            os << "  rows:   " << t.field(row, c_rows) << "\n";
        }
        return os.str();
    }
    throw ValidationError("no provenance record for " + report + "[" + row_key +
                          ", " + column + "]");
}

namespace {

bool is_trade_outcome(const std::string& s) {
    return s == "combined" || s == "wholesale" || s == "retail" ||
           s == "manufacturing";
}

bool is_manuf_outcome(const std::string& s) {
    return s == "log_manuf_employment" || s == "log_manuf_output";
}

std::optional<double> trade_outcome_value(const trade::TradeTable::Row& r,
                                          const std::string& outcome) {
    if (outcome == "combined") return r.combined;
    if (outcome == "wholesale") return r.wholesale;
    if (outcome == "retail") return r.retail;
    return r.manufacturing;
}

}  // namespace

FlexRegressionResult run_regression(const Manifest& m, const ReportBundle& bundle,
                                    const FlexRegressionSpec& spec) {
    auto frame = build_city_frame(bundle);
    auto city_value = [&](const std::string& city,
                          const std::string& name) -> std::optional<double> {
        auto it = frame.find(city);
        if (it == frame.end()) return std::nullopt;
        if (auto v = it->second.values.find(name); v != it->second.values.end()) {
            return v->second;
        }
        if (auto v = it->second.controls.find(name); v != it->second.controls.end()) {
            return v->second;
        }
        return std::nullopt;
    };

    FlexRegressionResult out;

    if (is_trade_outcome(spec.outcome) || is_manuf_outcome(spec.outcome)) {
        // panel dataset
        econ::PanelData panel;
        panel.treatment_name = spec.treatment;
        panel.control_names = spec.controls;
        std::map<std::string, int> units;
        std::map<std::int64_t, int> times;
        std::vector<std::tuple<std::string, std::int64_t, double>> rows;

        if (is_trade_outcome(spec.outcome)) {
            out.dataset = "trade";
            for (const auto& r : bundle.trade.rows) {
                if (r.month < m.did_start || r.month > m.did_end) continue;
                auto v = trade_outcome_value(r, spec.outcome);
                if (!v) continue;
                rows.emplace_back(r.city_id, r.month, *v);
            }
        } else {
            out.dataset = "manufacturing";
            for (const auto& r : bundle.manufacturing_rows) {
                double v = spec.outcome == "log_manuf_employment"
                               ? std::log(r.employment)
                               : std::log(r.output);
                rows.emplace_back(r.city_id, r.year, v);
            }
        }
        // complete cases on treatment and controls
        std::vector<std::tuple<std::string, std::int64_t, double>> kept;
        for (const auto& [city, t, v] : rows) {
            if (!city_value(city, spec.treatment)) continue;
            bool ok = true;
            for (const auto& c : spec.controls) {
                if (!city_value(city, c)) {
                    ok = false;
                    break;
                }
            }
            if (ok) kept.emplace_back(city, t, v);
        }
        if (kept.size() < 8) {
            throw EstimationError("regress: only " + std::to_string(kept.size()) +
                                  " usable panel rows for outcome '" + spec.outcome +
                                  "'");
        }
        for (const auto& [city, t, v] : kept) {
            (void)v;
            units.emplace(city, 0);
            times.emplace(t, 0);
        }
        int next = 0;
        for (auto& [city, id] : units) {
            (void)city;
            id = next++;
        }
        next = 0;
        for (auto& [t, id] : times) {
            id = next++;
            panel.time_value.push_back(t);
        }
        int n = static_cast<int>(kept.size());
        panel.outcome.resize(n);
        panel.treatment.resize(n);
        panel.controls.resize(n, static_cast<int>(spec.controls.size()));
        for (int i = 0; i < n; ++i) {
            const auto& [city, t, v] = kept[static_cast<size_t>(i)];
            panel.unit.push_back(units.at(city));
            panel.time.push_back(times.at(t));
            panel.outcome(i) = v;
            panel.treatment(i) = *city_value(city, spec.treatment);
            for (size_t j = 0; j < spec.controls.size(); ++j) {
                panel.controls(i, static_cast<int>(j)) =
                    *city_value(city, spec.controls[j]);
            }
        }

        if (spec.base_year) {
            econ::EventStudySpec es;
            es.base_period = *spec.base_year;
            es.cov = spec.cov;
            auto res = econ::event_study(panel, es);
            out.fit = std::move(res.fit);
            out.focal_terms = res.coef_index;
        } else if (spec.post_from) {
            econ::DidSpec ds;
            ds.post_from = *spec.post_from;
            ds.cov = spec.cov;
            out.fit = econ::did_estimate(panel, ds);
            out.focal_terms = {out.fit.term_index(spec.treatment + "_x_post")};
        } else {
            throw ValidationError(
                "panel outcomes need --post-from (DiD) or --base-year (event study)");
        }
        return out;
    }

    // cross-section
    out.dataset = "city";
    std::vector<std::string> cities;
    for (const auto& [city, row] : frame) {
        (void)row;
        if (!city_value(city, spec.outcome) || !city_value(city, spec.treatment)) {
            continue;
        }
        if (!spec.instrument.empty() && !city_value(city, spec.instrument)) continue;
        bool ok = true;
        for (const auto& c : spec.controls) {
            if (!city_value(city, c)) {
                ok = false;
                break;
            }
        }
        if (ok) cities.push_back(city);
    }
    int n = static_cast<int>(cities.size());
    int k = 2 + static_cast<int>(spec.controls.size());
    if (n < k + 2) {
        throw EstimationError("regress: only " + std::to_string(n) +
                              " usable cities for outcome '" + spec.outcome + "'");
    }
    Eigen::VectorXd y(n), treat(n), instr(n);
    Eigen::MatrixXd controls(n, static_cast<int>(spec.controls.size()));
    for (int i = 0; i < n; ++i) {
        const auto& city = cities[static_cast<size_t>(i)];
        y(i) = *city_value(city, spec.outcome);
        treat(i) = *city_value(city, spec.treatment);
        if (!spec.instrument.empty()) instr(i) = *city_value(city, spec.instrument);
        for (size_t j = 0; j < spec.controls.size(); ++j) {
            controls(i, static_cast<int>(j)) = *city_value(city, spec.controls[j]);
        }
    }

    econ::OlsOptions opts;
    opts.cov = spec.cov;
    if (!spec.instrument.empty()) {
        Eigen::MatrixXd exog(n, 1 + controls.cols());
        exog.col(0).setOnes();
        if (controls.cols() > 0) exog.rightCols(controls.cols()) = controls;
        std::vector<std::string> exog_names{"intercept"};
        for (const auto& c : spec.controls) exog_names.push_back(c);
        auto res = econ::tsls_fit(y, treat, instr, exog, exog_names, spec.treatment,
                                  spec.instrument, opts);
        out.fit = std::move(res.second_stage);
        out.focal_terms = {0};
        return out;
    }

    Eigen::MatrixXd X(n, k);
    X.col(0).setOnes();
    X.col(1) = treat;
    if (controls.cols() > 0) X.rightCols(controls.cols()) = controls;
    std::vector<std::string> names{"intercept", spec.treatment};
    for (const auto& c : spec.controls) names.push_back(c);
    out.fit = econ::ols_fit(y, X, names, opts);
    out.focal_terms = {1};

    if (spec.oster && !spec.controls.empty()) {
        auto base = econ::ols_fit(y, X.leftCols(2), {"intercept", spec.treatment}, opts);
        out.oster = econ::oster_bound(base.coef(1), base.r2, out.fit.coef(1), out.fit.r2);
    }
    return out;
}

void write_regression_output(const Manifest& m, const FlexRegressionResult& result,
                             const FlexRegressionSpec& spec) {
    fs::path out(m.output_dir.empty() ? "out" : m.output_dir);
    if (!out.is_absolute()) out = fs::path(m.path).parent_path() / out;
    fs::create_directories(out);

    csv::Writer w({"term", "estimate", "se", "t", "p", "ci_lo", "ci_hi"});
    const auto& fit = result.fit;
    for (size_t i = 0; i < fit.terms.size(); ++i) {
        int idx = static_cast<int>(i);
        auto ci = fit.confidence_interval(idx, 0.95);
        w.add_row({fit.terms[i], format_coef(fit.coef(idx)), format_coef(fit.se(idx)),
                   format_number(fit.tstat(idx), 3), format_number(fit.pvalue(idx), 4),
                   format_coef(ci.first), format_coef(ci.second)});
    }
    w.write_file((out / "results.csv").string());

    csv::Writer meta({"key", "value"});
    meta.add_row({"dataset", result.dataset});
    meta.add_row({"outcome", spec.outcome});
    meta.add_row({"treatment", spec.treatment});
    std::string ctrls;
    for (const auto& c : spec.controls) {
        if (!ctrls.empty()) ctrls += ",";
        ctrls += c;
    }
    meta.add_row({"controls", ctrls});
    meta.add_row({"covariance", econ::to_string(fit.cov)});
    meta.add_row({"n_obs", format_int(fit.n_obs)});
    if (fit.n_clusters > 0) meta.add_row({"n_clusters", format_int(fit.n_clusters)});
    meta.add_row({"r2", format_number(fit.r2, 4)});
    meta.add_row({"adj_r2", format_number(fit.adj_r2, 4)});
    meta.add_row({"df_residual", format_number(fit.df_residual, 1)});
    if (fit.first_stage_f) {
        meta.add_row({"first_stage_f", format_number(*fit.first_stage_f, 2)});
    }
    if (result.oster) {
        meta.add_row({"oster_r_max", format_number(result.oster->r_max, 4)});
        meta.add_row({"oster_beta_star", format_coef(result.oster->beta_star)});
        meta.add_row({"oster_delta_for_zero",
                      format_number(result.oster->delta_for_zero, 4)});
    }
    meta.write_file((out / "results_meta.csv").string());
}

}  // namespace epiflow::pipeline
