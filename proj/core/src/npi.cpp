#include "epiflow/npi.hpp"

#include <algorithm>

#include "epiflow/errors.hpp"

namespace epiflow::npi {

std::string to_string(Category c) {
    switch (c) {
        case Category::school_closure: return "school_closure";
        case Category::public_gathering_ban: return "public_gathering_ban";
        case Category::other_quarantine_isolation: return "other_quarantine_isolation";
    }
    return "?";
}

Category category_from_string(const std::string& s) {
    if (s == "school_closure") return Category::school_closure;
    if (s == "public_gathering_ban") return Category::public_gathering_ban;
    if (s == "other_quarantine_isolation") return Category::other_quarantine_isolation;
    throw ValidationError("unknown NPI category: '" + s + "'");
}

NpiRecord normalize(const std::string& city_id, const std::vector<RawInterval>& raw,
                    Date window_start, Date window_end) {
    NpiRecord rec;
    rec.city_id = city_id;
    std::array<std::vector<DateInterval>, kCategoryCount> buckets;
    for (const auto& r : raw) {
        if (r.end < r.start) {
            throw ValidationError(city_id + ": NPI interval ends (" +
                                  r.end.to_string() + ") before it starts (" +
                                  r.start.to_string() + ")");
        }
        if (!rec.first_response_date || r.start < *rec.first_response_date) {
            rec.first_response_date = r.start;
        }
        Date s = std::max(r.start, window_start);
        Date e = std::min(r.end, window_end);
        if (s > e) continue;  // entirely outside the window
        buckets[static_cast<size_t>(r.category)].push_back({s, e});
    }
    for (int c = 0; c < kCategoryCount; ++c) {
        auto& v = buckets[static_cast<size_t>(c)];
        std::sort(v.begin(), v.end(),
                  [](const DateInterval& a, const DateInterval& b) {
                      return a.start < b.start;
                  });
        std::vector<DateInterval> merged;
        for (const auto& iv : v) {
            // adjacent intervals ([.., d], [d+1, ..]) merge too: the union
            // of active days is what matters
            if (!merged.empty() && iv.start <= merged.back().end + 1) {
                merged.back().end = std::max(merged.back().end, iv.end);
            } else {
                merged.push_back(iv);
            }
        }
        rec.intervals[static_cast<size_t>(c)] = std::move(merged);
    }
    return rec;
}

int npi_intensity(const NpiRecord& r) {
    int days = 0;
    for (const auto& cat : r.intervals) {
        for (const auto& iv : cat) days += (iv.end - iv.start) + 1;
    }
    return days;
}

int npi_intensity_exclusive(const NpiRecord& r) {
    int days = 0;
    for (const auto& cat : r.intervals) {
        for (const auto& iv : cat) days += iv.end - iv.start;
    }
    return days;
}

int npi_speed(const NpiRecord& r, Date acceleration) {
    if (!r.first_response_date) {
        throw ValidationError(r.city_id + ": no NPI intervals; speed undefined");
    }
    return -(*r.first_response_date - acceleration);
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

HighNpiResult classify_high_npi(std::vector<NpiMeasures>& measures) {
    std::vector<double> intensities, speeds;
    for (const auto& m : measures) {
        if (m.speed) {
            intensities.push_back(m.intensity);
            speeds.push_back(*m.speed);
        }
    }
    if (intensities.size() < 2) {
        throw ValidationError("classify_high_npi: need at least 2 cities with "
                              "both intensity and speed");
    }
    HighNpiResult res;
    res.median_intensity = median(intensities);
    res.median_speed = median(speeds);
    for (auto& m : measures) {
        if (!m.speed) continue;
        bool high = m.intensity > res.median_intensity &&
                    static_cast<double>(*m.speed) > res.median_speed;
        m.high_npi = high;
        (high ? res.n_high : res.n_low) += 1;
    }
    res.degenerate = res.n_high == 0;
    return res;
}

}  // namespace epiflow::npi
