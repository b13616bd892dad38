#include "epiflow/trade.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "epiflow/errors.hpp"

namespace epiflow::trade {

std::string to_string(Sector s) {
    switch (s) {
        case Sector::wholesale: return "wholesale";
        case Sector::retail: return "retail";
        case Sector::manufacturing: return "manufacturing";
    }
    return "?";
}

Sector sector_from_string(const std::string& s) {
    if (s == "wholesale") return Sector::wholesale;
    if (s == "retail") return Sector::retail;
    if (s == "manufacturing") return Sector::manufacturing;
    throw ValidationError("unknown sector: '" + s + "'");
}

const std::vector<std::string_view>& good_phrases() {
    static const std::vector<std::string_view> v = {
        "good", "brisk", "excellent", "active", "liberal", "very active",
        "better", "record", "very good", "steady", "more active", "prompt"};
    return v;
}

const std::vector<std::string_view>& fair_phrases() {
    static const std::vector<std::string_view> v = {
        "fair", "moderate", "fair to good", "satisfactory", "close",
        "3/4 capacity", "60 percent", "75 percent", "75% basis", "normal",
        "fair activity", "fairly active", "hesitating", "hesitation",
        "only fair", "slowdown", "readjusting", "half speed", "half time",
        "hampered", "waiting", "slack", "uncertain", "suspended",
        "many strikes", "contracted", "disturbed", "inactive", "short time",
        "retarded", "paralyzed", "irregular", "unsettled", "conservative"};
    return v;
}

const std::vector<std::string_view>& bad_phrases() {
    static const std::vector<std::string_view> v = {
        "quiet", "dull", "slow", "very slow", "cautious", "interrupted",
        "light", "restricted", "below normal", "curtailed", "under normal",
        "poor", "lagging", "tardy", "delayed", "backward", "drag"};
    return v;
}

const std::vector<std::string_view>& reduce_keywords() {
    static const std::vector<std::string_view> v = {
        "reduced", "quieter", "slower", "slowing down", "smaller",
        "less active", "receding"};
    return v;
}

const std::vector<std::string_view>& increase_keywords() {
    // "enlarging" appears twice in the source list; kept verbatim.
    static const std::vector<std::string_view> v = {
        "improved", "improving", "slightly better", "enlarging", "shifting",
        "enlarging", "improvement", "increasing"};
    return v;
}

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_space = true;
        }
    }
    return out;
}

namespace {

struct PhraseEntry {
    std::vector<std::string> tokens;
    int level = 0;   // 1..3 for base phrases, 0 for relative keywords
    int notch = 0;   // -1 reduce, +1 increase, 0 base
};

std::vector<std::string> tokenize(const std::string& normalized) {
    std::vector<std::string> tokens;
    std::istringstream ss(normalized);
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    return tokens;
}

struct Lexicon {
    std::vector<PhraseEntry> entries;

    Lexicon() {
        auto add = [&](const std::vector<std::string_view>& phrases, int level,
                       int notch) {
            for (auto p : phrases) {
                PhraseEntry e;
                e.tokens = tokenize(normalize_text(p));
                e.level = level;
                e.notch = notch;
                entries.push_back(std::move(e));
            }
        };
        add(good_phrases(), 3, 0);
        add(fair_phrases(), 2, 0);
        add(bad_phrases(), 1, 0);
        add(reduce_keywords(), 0, -1);
        add(increase_keywords(), 0, +1);
        // longest phrases first so greedy matching prefers them
        std::stable_sort(entries.begin(), entries.end(),
                         [](const PhraseEntry& a, const PhraseEntry& b) {
                             return a.tokens.size() > b.tokens.size();
                         });
    }

    const PhraseEntry* match_at(const std::vector<std::string>& tokens,
                                size_t pos) const {
        for (const auto& e : entries) {
            if (pos + e.tokens.size() > tokens.size()) continue;
            bool ok = true;
            for (size_t i = 0; i < e.tokens.size(); ++i) {
                if (tokens[pos + i] != e.tokens[i]) {
                    ok = false;
                    break;
                }
            }
            if (ok) return &e;
        }
        return nullptr;
    }
};

const Lexicon& lexicon() {
    static const Lexicon lex;
    return lex;
}

}  // namespace

std::optional<TradeRating> classify_snippet(std::string_view text) {
    std::vector<std::string> tokens = tokenize(normalize_text(text));
    if (tokens.empty()) return std::nullopt;

    int base_level = 0;
    bool any_reduce = false, any_increase = false;
    size_t pos = 0;
    while (pos < tokens.size()) {
        const PhraseEntry* e = lexicon().match_at(tokens, pos);
        if (!e) {
            ++pos;
            continue;
        }
        if (e->notch == 0) {
            if (base_level == 0) base_level = e->level;  // first base phrase wins
        } else if (e->notch < 0) {
            any_reduce = true;
        } else {
            any_increase = true;
        }
        pos += e->tokens.size();
    }
    if (base_level == 0) return std::nullopt;

    // one notch at most, clamped
    int level = base_level + (any_increase ? 1 : 0) - (any_reduce ? 1 : 0);
    level = std::clamp(level, 1, 3);
    return TradeRating{static_cast<Level>(level)};
}

std::int64_t month_key(Date d) {
    return static_cast<std::int64_t>(d.year()) * 12 + (d.month() - 1);
}

std::string month_key_to_string(std::int64_t key) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", static_cast<int>(key / 12),
                  static_cast<int>(key % 12) + 1);
    return buf;
}

MonthlyIndex monthly_aggregate(const std::vector<ClassifiedWeek>& weeks) {
    MonthlyIndex out;
    std::map<std::int64_t, double> bin_sum, lvl_sum;
    for (const auto& w : weeks) {
        std::int64_t m = month_key(w.week_end_date);
        bin_sum[m] += w.rating.binary();
        lvl_sum[m] += static_cast<int>(w.rating.level);
        out.n_obs[m] += 1;
    }
    for (const auto& [m, n] : out.n_obs) {
        out.binary[m] = bin_sum[m] / n;
        out.level[m] = lvl_sum[m] / n;
    }
    return out;
}

std::optional<double> combined_index(const std::optional<double>& wholesale,
                                     const std::optional<double>& retail,
                                     const std::optional<double>& manufacturing) {
    double sum = 0;
    int n = 0;
    for (const auto& v : {wholesale, retail, manufacturing}) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

TradeTable build_table(const std::vector<TradeSnippet>& snippets, int min_city_obs) {
    TradeTable out;

    // classify, dropping strike weeks and unmatchable text
    std::map<std::string, std::array<std::vector<ClassifiedWeek>, kSectorCount>> by_city;
    std::map<std::string, int> city_obs;
    for (const auto& s : snippets) {
        if (s.remarks_mentions_strike) {
            ++out.strike_excluded;
            continue;
        }
        auto rating = classify_snippet(s.text);
        if (!rating) {
            ++out.unclassified;
            continue;
        }
        by_city[s.city_id][static_cast<size_t>(s.sector)].push_back(
            ClassifiedWeek{s.week_end_date, *rating});
        city_obs[s.city_id] += 1;
    }

    for (auto& [city, sectors] : by_city) {
        if (city_obs[city] < min_city_obs) {
            out.excluded_cities.push_back(city);
            continue;
        }
        std::array<MonthlyIndex, kSectorCount> monthly;
        std::set<std::int64_t> months;
        for (int s = 0; s < kSectorCount; ++s) {
            monthly[static_cast<size_t>(s)] =
                monthly_aggregate(sectors[static_cast<size_t>(s)]);
            for (const auto& [m, v] : monthly[static_cast<size_t>(s)].binary) {
                (void)v;
                months.insert(m);
            }
        }
        for (std::int64_t m : months) {
            TradeTable::Row row;
            row.city_id = city;
            row.month = m;
            auto get = [&](int s) -> std::optional<double> {
                const auto& idx = monthly[static_cast<size_t>(s)];
                auto it = idx.binary.find(m);
                if (it == idx.binary.end()) return std::nullopt;
                return it->second;
            };
            auto get_level = [&](int s) -> std::optional<double> {
                const auto& idx = monthly[static_cast<size_t>(s)];
                auto it = idx.level.find(m);
                if (it == idx.level.end()) return std::nullopt;
                return it->second;
            };
            row.wholesale = get(0);
            row.retail = get(1);
            row.manufacturing = get(2);
            row.combined = combined_index(row.wholesale, row.retail, row.manufacturing);
            row.wholesale_level = get_level(0);
            row.retail_level = get_level(1);
            row.manufacturing_level = get_level(2);
            row.combined_level =
                combined_index(row.wholesale_level, row.retail_level,
                               row.manufacturing_level);
            for (int s = 0; s < kSectorCount; ++s) {
                const auto& idx = monthly[static_cast<size_t>(s)];
                auto it = idx.n_obs.find(m);
                if (it != idx.n_obs.end()) row.n_obs += it->second;
            }
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

}  // namespace epiflow::trade
