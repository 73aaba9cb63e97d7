#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "weekcast/errors.hpp"

namespace weekcast {

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
};

// "YYYY-MM-DD"; rejects impossible calendar dates.
Date parse_date(const std::string& text);
std::string date_str(const Date& d);

// Days since 1970-01-01 (proleptic Gregorian), and its inverse.
std::int64_t days_from_civil(const Date& d);
Date civil_from_days(std::int64_t days);

// 0 = Sunday .. 6 = Saturday.
int weekday(const Date& d);

Date next_day(const Date& d);

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

struct DailyRecord {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  std::int64_t volume = 0;

  bool operator==(const DailyRecord&) const = default;
};

using Series = std::vector<DailyRecord>;

std::vector<double> opens(const Series& series);

struct ParsedSeries {
  Series series;
  std::size_t dropped_rows = 0;  // unparseable or invariant-violating rows
};

// Header must name Date, Open, High, Low, Close, Volume (case-insensitive,
// any order, extra columns ignored). Rows whose numerics fail to parse or
// violate low <= open,close <= high are dropped and counted. Output is
// sorted by date; duplicate dates are an error listing the offenders.
ParsedSeries parse_csv(const std::string& text);
ParsedSeries load_csv(const std::string& path);
std::string to_csv(const Series& series);

// Inclusive boundaries: train takes every record dated <= train_end, test
// every record dated >= test_start.
struct SplitSeries {
  Series train;
  Series test;
};
SplitSeries split(const Series& series, const Date& train_end, const Date& test_start);

using WeekBlock = std::array<DailyRecord, 5>;

struct WeekSplit {
  std::vector<WeekBlock> weeks;
  std::size_t dropped_records = 0;  // trailing remainder shorter than 5
};

// Positional, non-overlapping 5-record blocks in series order; calendar
// gaps are ignored on purpose.
WeekSplit make_weeks(const Series& series);

struct WindowSet {
  std::size_t input_len = 0;
  std::size_t stride = 1;
  std::vector<std::size_t> source_index;
  std::vector<std::vector<double>> inputs;
  std::vector<std::array<double, 5>> targets;  // the 5 opens right after each input

  std::size_t count() const { return inputs.size(); }
};

WindowSet make_windows(std::span<const double> opens, std::size_t input_len,
                       std::size_t stride = 1);
WindowSet make_windows(const Series& series, std::size_t input_len, std::size_t stride = 1);

}  // namespace weekcast
