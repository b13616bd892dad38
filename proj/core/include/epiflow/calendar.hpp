#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace epiflow {

enum class Frequency { daily, weekly, monthly };

std::string to_string(Frequency f);
Frequency frequency_from_string(std::string_view s);

// A calendar day, stored as a count of days since 1970-01-01.
// Weeks end on Saturday throughout (the Weekly Health Index convention),
// months are true calendar months.
class Date {
public:
    Date() : days_(0) {}
    explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int year, unsigned month, unsigned day);
    // Parses strict ISO-8601 "YYYY-MM-DD".
    static Date parse(std::string_view iso);

    std::int32_t days_since_epoch() const { return days_; }
    int year() const;
    unsigned month() const;
    unsigned day() const;
    // 0 = Sunday .. 6 = Saturday
    int weekday() const;

    // Saturday on or after this date (end of the enclosing week).
    Date week_end() const;
    // First / last day of the enclosing calendar month.
    Date month_start() const;
    Date month_end() const;

    std::string to_string() const;

    Date operator+(int days) const { return Date(days_ + days); }
    Date operator-(int days) const { return Date(days_ - days); }
    int operator-(Date other) const { return days_ - other.days_; }
    Date& operator++() { ++days_; return *this; }
    auto operator<=>(const Date&) const = default;

private:
    std::int32_t days_;
};

// Identifies the period a day belongs to, for a given frequency.
// Weekly keys are the epoch-day of the week-ending Saturday; monthly keys
// are year*12+month; daily keys are the epoch-day itself.
std::int64_t period_key(Date d, Frequency f);
// Last day of the period identified by a key.
Date period_end_from_key(std::int64_t key, Frequency f);

// A contiguous daily grid.
struct CalendarGrid {
    Date start;
    int length_days = 0;

    CalendarGrid() = default;
    CalendarGrid(Date start_date, int length);

    Date end() const { return start + (length_days - 1); }
    bool contains(Date d) const { return d >= start && d <= end(); }
    int index_of(Date d) const;  // throws if outside the grid
    Date date_at(int index) const;

    // Period boundaries covered by the grid for a frequency, in order.
    // Each entry is (first grid index, number of days) of one period.
    struct PeriodSpan { int first_index; int n_days; std::int64_t key; };
    std::vector<PeriodSpan> periods(Frequency f) const;

    // True when the grid starts and ends exactly on period boundaries.
    bool aligned_to(Frequency f) const;

    bool operator==(const CalendarGrid&) const = default;
};

}  // namespace epiflow
