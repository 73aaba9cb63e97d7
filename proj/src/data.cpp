#include "weekcast/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace weekcast {

namespace {

std::string trim(std::string s) {
  auto junk = [](unsigned char c) { return std::isspace(c) || c == '"' || c == '\''; };
  while (!s.empty() && junk(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
  while (!s.empty() && junk(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && std::isfinite(out);
}

bool parse_int64(const std::string& s, std::int64_t& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::int64_t days_from_civil(const Date& d) {
  int y = d.year;
  const unsigned m = static_cast<unsigned>(d.month);
  const unsigned day = static_cast<unsigned>(d.day);
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + day - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

Date civil_from_days(std::int64_t days) {
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned day = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(day)};
}

int weekday(const Date& d) {
  const std::int64_t z = days_from_civil(d);
  return static_cast<int>(((z % 7) + 11) % 7);  // 1970-01-01 was a Thursday
}

Date next_day(const Date& d) { return civil_from_days(days_from_civil(d) + 1); }

Date parse_date(const std::string& text) {
  const std::string s = trim(text);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw DataError("bad date '" + text + "' (expected YYYY-MM-DD)");
  std::int64_t y = 0, m = 0, d = 0;
  if (!parse_int64(s.substr(0, 4), y) || !parse_int64(s.substr(5, 2), m) ||
      !parse_int64(s.substr(8, 2), d))
    throw DataError("bad date '" + text + "' (expected YYYY-MM-DD)");
  const Date date{static_cast<int>(y), static_cast<int>(m), static_cast<int>(d)};
  if (m < 1 || m > 12 || d < 1 || civil_from_days(days_from_civil(date)) != date)
    throw DataError("bad date '" + text + "' (no such calendar day)");
  return date;
}

std::string date_str(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

std::vector<double> opens(const Series& series) {
  std::vector<double> out;
  out.reserve(series.size());
  for (const auto& r : series) out.push_back(r.open);
  return out;
}

ParsedSeries parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw DataError("csv: empty input");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_fields(line);
  auto find_col = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (lower(header[i]) == name) return i;
    throw DataError("csv: missing required column '" + name + "'");
  };
  const std::size_t c_date = find_col("date");
  const std::size_t c_open = find_col("open");
  const std::size_t c_high = find_col("high");
  const std::size_t c_low = find_col("low");
  const std::size_t c_close = find_col("close");
  const std::size_t c_volume = find_col("volume");
  const std::size_t need =
      std::max({c_date, c_open, c_high, c_low, c_close, c_volume}) + 1;

  ParsedSeries out;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    DailyRecord r;
    bool ok = fields.size() >= need;
    if (ok) {
      try {
        r.date = parse_date(fields[c_date]);
      } catch (const DataError&) {
        ok = false;
      }
    }
    ok = ok && parse_double(fields[c_open], r.open) && parse_double(fields[c_high], r.high) &&
         parse_double(fields[c_low], r.low) && parse_double(fields[c_close], r.close) &&
         parse_int64(fields[c_volume], r.volume);
    ok = ok && r.open > 0 && r.high > 0 && r.low > 0 && r.close > 0 && r.volume >= 0 &&
         r.low <= r.open && r.open <= r.high && r.low <= r.close && r.close <= r.high;
    if (!ok) {
      ++out.dropped_rows;
      continue;
    }
    out.series.push_back(r);
  }
  if (out.series.empty()) throw DataError("csv: no usable rows");

  std::stable_sort(out.series.begin(), out.series.end(),
                   [](const DailyRecord& a, const DailyRecord& b) { return a.date < b.date; });

  std::string dups;
  for (std::size_t i = 1; i < out.series.size(); ++i)
    if (out.series[i].date == out.series[i - 1].date)
      dups += (dups.empty() ? "" : ", ") + date_str(out.series[i].date);
  if (!dups.empty()) throw DataError("csv: duplicate dates: " + dups);
  return out;
}

ParsedSeries load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

std::string to_csv(const Series& series) {
  std::string out = "Date,Open,High,Low,Close,Volume\n";
  for (const auto& r : series) {
    out += date_str(r.date);
    out += ',';
    out += format_double(r.open);
    out += ',';
    out += format_double(r.high);
    out += ',';
    out += format_double(r.low);
    out += ',';
    out += format_double(r.close);
    out += ',';
    out += std::to_string(r.volume);
    out += '\n';
  }
  return out;
}

SplitSeries split(const Series& series, const Date& train_end, const Date& test_start) {
  if (test_start <= train_end)
    throw DataError("split: test start " + date_str(test_start) +
                    " must come after train end " + date_str(train_end));
  SplitSeries out;
  for (const auto& r : series) {
    if (r.date <= train_end) out.train.push_back(r);
    if (r.date >= test_start) out.test.push_back(r);
  }
  if (out.train.empty()) throw DataError("split: no records on or before " + date_str(train_end));
  if (out.test.empty()) throw DataError("split: no records on or after " + date_str(test_start));
  return out;
}

WeekSplit make_weeks(const Series& series) {
  if (series.size() < 5)
    throw DataError("make_weeks: need at least 5 records, got " + std::to_string(series.size()));
  WeekSplit out;
  const std::size_t blocks = series.size() / 5;
  out.weeks.reserve(blocks);
  for (std::size_t w = 0; w < blocks; ++w) {
    WeekBlock block;
    for (std::size_t i = 0; i < 5; ++i) block[i] = series[w * 5 + i];
    out.weeks.push_back(block);
  }
  out.dropped_records = series.size() - blocks * 5;
  return out;
}

WindowSet make_windows(std::span<const double> opens, std::size_t input_len, std::size_t stride) {
  if (input_len == 0) throw DataError("make_windows: input_len must be positive");
  if (stride == 0) throw DataError("make_windows: stride must be positive");
  if (opens.size() < input_len + 5)
    throw DataError("make_windows: series of " + std::to_string(opens.size()) +
                    " is shorter than input_len + 5 = " + std::to_string(input_len + 5));
  WindowSet out;
  out.input_len = input_len;
  out.stride = stride;
  for (std::size_t i = 0; i + input_len + 5 <= opens.size(); i += stride) {
    out.source_index.push_back(i);
    out.inputs.emplace_back(opens.begin() + static_cast<std::ptrdiff_t>(i),
                            opens.begin() + static_cast<std::ptrdiff_t>(i + input_len));
    std::array<double, 5> target;
    for (std::size_t j = 0; j < 5; ++j) target[j] = opens[i + input_len + j];
    out.targets.push_back(target);
  }
  return out;
}

WindowSet make_windows(const Series& series, std::size_t input_len, std::size_t stride) {
  const auto o = opens(series);
  return make_windows(std::span<const double>(o), input_len, stride);
}

}  // namespace weekcast
