#include "epiflow/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "epiflow/errors.hpp"

namespace epiflow::pipeline {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

// "YYYY-MM" -> month key
std::int64_t parse_month(const std::string& s) {
    if (s.size() != 7 || s[4] != '-') {
        throw ValidationError("expected YYYY-MM month, got '" + s + "'");
    }
    int y = std::stoi(s.substr(0, 4));
    int m = std::stoi(s.substr(5, 2));
    if (m < 1 || m > 12) throw ValidationError("month out of range in '" + s + "'");
    return static_cast<std::int64_t>(y) * 12 + (m - 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

mortality::ExcessParams Manifest::excess_params() const {
    mortality::ExcessParams p;
    p.weekly = {Frequency::weekly, weekly_bandwidth};
    p.monthly = {Frequency::monthly, monthly_bandwidth};
    p.scale = scale;
    return p;
}

std::string Manifest::resolve(const std::string& p) const {
    if (p.empty()) return p;
    fs::path candidate(p);
    if (candidate.is_absolute()) return p;
    fs::path base = fs::path(path).parent_path();
    return (base / candidate).string();
}

Manifest parse_manifest(const std::string& text, const std::string& base_dir,
                        bool check_files) {
    Manifest m;
    m.path = (fs::path(base_dir) / "manifest").string();

    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("manifest line " + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + t + "'");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (kv.count(key)) {
            throw ValidationError("manifest line " + std::to_string(lineno) +
                                  ": duplicate key '" + key + "'");
        }
        kv[key] = value;
    }

    auto take = [&](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto take_number = [&](const std::string& key, double& out) {
        if (auto v = take(key)) out = std::stod(*v);
    };
    auto take_int = [&](const std::string& key, int& out) {
        if (auto v = take(key)) out = std::stoi(*v);
    };

    const std::pair<const char*, std::string*> path_keys[] = {
        {"weekly_deaths", &m.weekly_deaths},
        {"monthly_baseline", &m.monthly_baseline},
        {"population", &m.population},
        {"npi_intervals", &m.npi_intervals},
        {"trade_snippets", &m.trade_snippets},
        {"camps", &m.camps},
        {"locations", &m.locations},
        {"controls", &m.controls},
        {"manufacturing", &m.manufacturing},
        {"output_dir", &m.output_dir}};
    for (const auto& p : path_keys) {
        if (auto v = take(p.first)) *p.second = *v;
    }

    take_number("scale", m.scale);
    if (auto v = take("window_start")) m.window_start = Date::parse(*v);
    take_int("window_weeks", m.window_weeks);
    take_int("weekly_bandwidth", m.weekly_bandwidth);
    take_int("monthly_bandwidth", m.monthly_bandwidth);
    take_int("impute_max_gap", m.impute_max_gap);
    if (auto v = take("did_start")) m.did_start = parse_month(*v);
    if (auto v = take("did_end")) m.did_end = parse_month(*v);
    if (auto v = take("post_from")) m.post_from = parse_month(*v);
    take_int("base_year", m.base_year);
    take_int("min_trade_obs", m.min_trade_obs);
    if (auto v = take("camp_window_first")) m.camp_window_first = parse_month(*v);
    if (auto v = take("camp_window_last")) m.camp_window_last = parse_month(*v);
    if (auto v = take("cross_section_cov")) {
        m.cross_section_cov = econ::cov_flavor_from_string(*v);
    }
    if (auto v = take("panel_cov")) m.panel_cov = econ::cov_flavor_from_string(*v);
    if (auto v = take("controls_baseline")) m.controls_baseline = split_list(*v);
    if (auto v = take("controls_extended")) m.controls_extended = split_list(*v);

    if (!kv.empty()) {
        std::string keys;
        for (const auto& [k, v] : kv) {
            (void)v;
            if (!keys.empty()) keys += ", ";
            keys += k;
        }
        throw ValidationError("manifest has unknown keys: " + keys);
    }

    // consistency checks
    if (m.scale <= 0) throw ValidationError("manifest: scale must be positive");
    if (m.window_weeks <= 0) {
        throw ValidationError("manifest: window_weeks must be positive");
    }
    if (m.weekly_bandwidth < 1 || m.monthly_bandwidth < 1) {
        throw ValidationError("manifest: bandwidths must be >= 1");
    }
    if (m.did_end < m.did_start) {
        throw ValidationError("manifest: did_end before did_start");
    }
    if (m.post_from < m.did_start || m.post_from > m.did_end) {
        throw ValidationError("manifest: post_from outside the DiD window");
    }
    if (m.camp_window_last < m.camp_window_first) {
        throw ValidationError("manifest: camp strength window is empty");
    }

    if (check_files) {
        for (const auto* p :
             {&m.weekly_deaths, &m.monthly_baseline, &m.population, &m.npi_intervals,
              &m.trade_snippets, &m.camps, &m.locations, &m.controls,
              &m.manufacturing}) {
            if (p->empty()) continue;
            std::string full = m.resolve(*p);
            if (!fs::exists(full)) {
                throw ValidationError("manifest references missing file: " + full);
            }
        }
    }
    return m;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    Manifest m = parse_manifest(ss.str(), fs::path(path).parent_path().string());
    m.path = path;
    return m;
}

}  // namespace epiflow::pipeline
