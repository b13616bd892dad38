#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "epiflow/calendar.hpp"

namespace epiflow::trade {

enum class Sector { wholesale, retail, manufacturing };
inline constexpr int kSectorCount = 3;

std::string to_string(Sector s);
Sector sector_from_string(const std::string& s);

// 3-level condition rating; the binary disruption index is 100 exactly
// when conditions are Good.
enum class Level : int { bad = 1, fair = 2, good = 3 };

struct TradeRating {
    Level level = Level::fair;
    int binary() const { return level == Level::good ? 100 : 0; }
};

struct TradeSnippet {
    std::string city_id;
    Sector sector = Sector::wholesale;
    Date week_end_date;
    std::string text;
    bool remarks_mentions_strike = false;
};

// Lowercases, maps punctuation to spaces, and collapses whitespace; both
// snippets and the embedded phrase lists go through this before matching.
std::string normalize_text(std::string_view text);

// The fixed word lists (verbatim; "enlarging" is listed twice among the
// increase keywords in the source material).
const std::vector<std::string_view>& good_phrases();
const std::vector<std::string_view>& fair_phrases();
const std::vector<std::string_view>& bad_phrases();
const std::vector<std::string_view>& reduce_keywords();
const std::vector<std::string_view>& increase_keywords();

// Exact-phrase classification with at most one notch of relative
// adjustment, clamped to [Bad, Good]. Longer phrases win over shorter ones
// ("fair to good" beats "good"). Returns nullopt when no base phrase
// matches (a relative keyword alone does not classify).
std::optional<TradeRating> classify_snippet(std::string_view text);

std::int64_t month_key(Date d);
std::string month_key_to_string(std::int64_t key);  // "YYYY-MM"

// Monthly aggregation of one city-sector's classified values: the mean of
// the weekly binary (and 3-level) values present in each month. Months
// without snippets are absent, never zero.
struct MonthlyIndex {
    std::map<std::int64_t, double> binary;  // 0..100
    std::map<std::int64_t, double> level;   // 1..3
    std::map<std::int64_t, int> n_obs;
};

struct ClassifiedWeek {
    Date week_end_date;
    TradeRating rating;
};

MonthlyIndex monthly_aggregate(const std::vector<ClassifiedWeek>& weeks);

// Unweighted mean over the sectors reporting that month; absent when no
// sector reports.
std::optional<double> combined_index(const std::optional<double>& wholesale,
                                     const std::optional<double>& retail,
                                     const std::optional<double>& manufacturing);

// Full city-month table for a snippet corpus: strike-flagged snippets are
// excluded, unclassifiable snippets are counted and excluded, and cities
// with fewer than min_city_obs classified observations are dropped.
struct TradeTable {
    struct Row {
        std::string city_id;
        std::int64_t month = 0;
        std::optional<double> wholesale, retail, manufacturing, combined;
        std::optional<double> wholesale_level, retail_level, manufacturing_level,
            combined_level;
        int n_obs = 0;
    };
    std::vector<Row> rows;  // sorted by (city_id, month)
    std::vector<std::string> excluded_cities;
    int strike_excluded = 0;
    int unclassified = 0;
};

TradeTable build_table(const std::vector<TradeSnippet>& snippets, int min_city_obs);

}  // namespace epiflow::trade
