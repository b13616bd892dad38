#include "epiflow/calendar.hpp"

#include <charconv>
#include <chrono>

#include "epiflow/errors.hpp"

namespace epiflow {

namespace {

std::chrono::year_month_day to_ymd(std::int32_t days) {
    return std::chrono::year_month_day{
        std::chrono::sys_days{std::chrono::days{days}}};
}

}  // namespace

std::string to_string(Frequency f) {
    switch (f) {
        case Frequency::daily: return "daily";
        case Frequency::weekly: return "weekly";
        case Frequency::monthly: return "monthly";
    }
    return "?";
}

Frequency frequency_from_string(std::string_view s) {
    if (s == "daily") return Frequency::daily;
    if (s == "weekly") return Frequency::weekly;
    if (s == "monthly") return Frequency::monthly;
    throw ValidationError("unknown frequency: '" + std::string(s) + "'");
}

Date Date::from_ymd(int year, unsigned month, unsigned day) {
    std::chrono::year_month_day ymd{std::chrono::year{year},
                                    std::chrono::month{month},
                                    std::chrono::day{day}};
    if (!ymd.ok()) {
        throw ValidationError("invalid calendar date: " + std::to_string(year) +
                              "-" + std::to_string(month) + "-" +
                              std::to_string(day));
    }
    return Date(static_cast<std::int32_t>(
        std::chrono::sys_days{ymd}.time_since_epoch().count()));
}

Date Date::parse(std::string_view iso) {
    auto fail = [&] {
        throw ValidationError("invalid ISO-8601 date: '" + std::string(iso) + "'");
    };
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') fail();
    int y = 0;
    unsigned m = 0, d = 0;
    auto num = [&](std::string_view s, auto& out) {
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        if (ec != std::errc{} || p != s.data() + s.size()) fail();
    };
    num(iso.substr(0, 4), y);
    num(iso.substr(5, 2), m);
    num(iso.substr(8, 2), d);
    return from_ymd(y, m, d);
}

int Date::year() const { return static_cast<int>(to_ymd(days_).year()); }
unsigned Date::month() const { return static_cast<unsigned>(to_ymd(days_).month()); }
unsigned Date::day() const { return static_cast<unsigned>(to_ymd(days_).day()); }

int Date::weekday() const {
    std::chrono::weekday wd{std::chrono::sys_days{std::chrono::days{days_}}};
    return static_cast<int>(wd.c_encoding());
}

Date Date::week_end() const {
    return *this + ((6 - weekday() + 7) % 7);
}

Date Date::month_start() const {
    auto ymd = to_ymd(days_);
    return from_ymd(static_cast<int>(ymd.year()),
                    static_cast<unsigned>(ymd.month()), 1);
}

Date Date::month_end() const {
    auto ymd = to_ymd(days_);
    std::chrono::year_month_day_last last{ymd.year(),
                                          std::chrono::month_day_last{ymd.month()}};
    return Date(static_cast<std::int32_t>(
        std::chrono::sys_days{last}.time_since_epoch().count()));
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", year(), month(), day());
    return buf;
}

std::int64_t period_key(Date d, Frequency f) {
    switch (f) {
        case Frequency::daily: return d.days_since_epoch();
        case Frequency::weekly: return d.week_end().days_since_epoch();
        case Frequency::monthly: return static_cast<std::int64_t>(d.year()) * 12 + (d.month() - 1);
    }
    return 0;
}

Date period_end_from_key(std::int64_t key, Frequency f) {
    switch (f) {
        case Frequency::daily:
        case Frequency::weekly:
            return Date(static_cast<std::int32_t>(key));
        case Frequency::monthly: {
            int y = static_cast<int>(key / 12);
            unsigned m = static_cast<unsigned>(key % 12) + 1;
            return Date::from_ymd(y, m, 1).month_end();
        }
    }
    return Date();
}

CalendarGrid::CalendarGrid(Date start_date, int length)
    : start(start_date), length_days(length) {
    if (length <= 0) {
        throw ValidationError("calendar grid length must be positive");
    }
}

int CalendarGrid::index_of(Date d) const {
    if (!contains(d)) {
        throw ValidationError("date " + d.to_string() + " outside grid " +
                              start.to_string() + ".." + end().to_string());
    }
    return d - start;
}

Date CalendarGrid::date_at(int index) const {
    if (index < 0 || index >= length_days) {
        throw ValidationError("grid index out of range: " + std::to_string(index));
    }
    return start + index;
}

std::vector<CalendarGrid::PeriodSpan> CalendarGrid::periods(Frequency f) const {
    std::vector<PeriodSpan> out;
    int i = 0;
    while (i < length_days) {
        Date d = start + i;
        std::int64_t key = period_key(d, f);
        int j = i;
        while (j < length_days && period_key(start + j, f) == key) ++j;
        out.push_back(PeriodSpan{i, j - i, key});
        i = j;
    }
    return out;
}

bool CalendarGrid::aligned_to(Frequency f) const {
    switch (f) {
        case Frequency::daily:
            return true;
        case Frequency::weekly:
            return start.weekday() == 0 && end().weekday() == 6;
        case Frequency::monthly:
            return start.day() == 1 && end() == end().month_end();
    }
    return false;
}

}  // namespace epiflow
