#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "covcraft/errors.hpp"
#include "covcraft/matrix.hpp"

namespace covcraft {

// ---------------------------------------------------------------------------
// ISO-8601 calendar helpers (proleptic Gregorian).

namespace detail {

// Days since 1970-01-01 for a civil date (Hinnant's algorithm).
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline std::array<int, 3> civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

inline bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int y, int m) {
  static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

}  // namespace detail

inline bool is_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (s[i] < '0' || s[i] > '9') return false;
  const int y = (s[0] - '0') * 1000 + (s[1] - '0') * 100 + (s[2] - '0') * 10 + (s[3] - '0');
  const int m = (s[5] - '0') * 10 + (s[6] - '0');
  const int d = (s[8] - '0') * 10 + (s[9] - '0');
  return m >= 1 && m <= 12 && d >= 1 && d <= detail::days_in_month(y, m);
}

inline std::string format_iso_date(std::int64_t days_since_epoch) {
  const auto [y, m, d] = detail::civil_from_days(days_since_epoch);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

// Shortest decimal string that round-trips the exact double.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Returns panel.

// Daily simple returns with assets as rows (M x N). Dates are strictly
// increasing ISO-8601 strings; every cell is finite. Ingestion additionally
// requires M >= 2 and N >= 2; window slices may be narrower.
class ReturnsPanel {
 public:
  ReturnsPanel(std::vector<std::string> assets, std::vector<std::string> dates,
               Matrix returns)
      : assets_(std::move(assets)), dates_(std::move(dates)), returns_(std::move(returns)) {
    if (assets_.empty()) fail(ErrorCode::kTooFewAssets, "panel has no assets");
    if (dates_.empty()) fail(ErrorCode::kTooFewSamples, "panel has no days");
    if (returns_.rows() != assets_.size() || returns_.cols() != dates_.size())
      fail(ErrorCode::kDimensionMismatch, "returns shape does not match labels");
    for (const std::string& d : dates_)
      if (!is_iso_date(d)) fail(ErrorCode::kParseError, "date not ISO-8601: " + d);
    for (std::size_t t = 1; t < dates_.size(); ++t)
      if (!(dates_[t - 1] < dates_[t]))
        fail(ErrorCode::kNonMonotonicDates,
             "dates not strictly increasing at " + dates_[t]);
    for (std::size_t i = 0; i < returns_.rows(); ++i)
      for (std::size_t t = 0; t < returns_.cols(); ++t)
        if (!std::isfinite(returns_(i, t)))
          fail(ErrorCode::kMissingCell, "non-finite return for " + assets_[i] + " on " +
                                            dates_[t]);
  }

  std::size_t n_assets() const { return assets_.size(); }
  std::size_t n_days() const { return dates_.size(); }
  const std::vector<std::string>& assets() const { return assets_; }
  const std::vector<std::string>& dates() const { return dates_; }
  const Matrix& returns() const { return returns_; }

 private:
  std::vector<std::string> assets_;
  std::vector<std::string> dates_;
  Matrix returns_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

inline double parse_return_cell(const std::string& cell, const std::string& date,
                                const std::string& asset) {
  const char* first = cell.data();
  const char* last = first + cell.size();
  double value = 0.0;
  const auto res = std::from_chars(first, last, value);
  if (cell.empty() || res.ec != std::errc{} || res.ptr != last || !std::isfinite(value))
    fail(ErrorCode::kMissingCell,
         "bad cell for " + asset + " on " + date + ": '" + cell + "'");
  return value;
}

}  // namespace detail

// CSV layout: header `date,ASSET1,...`; one row per day `YYYY-MM-DD,r1,...`.
inline ReturnsPanel parse_panel_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kParseError, "empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = detail::split_csv_line(line);
  if (header.size() < 3)
    fail(ErrorCode::kTooFewAssets, "need at least 2 asset columns");
  std::vector<std::string> assets(header.begin() + 1, header.end());
  const std::size_t m = assets.size();

  std::vector<std::string> dates;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() < m + 1)
      fail(ErrorCode::kMissingCell, "row " + cells[0] + " has " +
                                        std::to_string(cells.size() - 1) + " cells, expected " +
                                        std::to_string(m));
    if (cells.size() > m + 1)
      fail(ErrorCode::kParseError, "row " + cells[0] + " has extra cells");
    if (!is_iso_date(cells[0]))
      fail(ErrorCode::kParseError, "date not ISO-8601: " + cells[0]);
    std::vector<double> row(m);
    for (std::size_t i = 0; i < m; ++i)
      row[i] = detail::parse_return_cell(cells[i + 1], cells[0], assets[i]);
    dates.push_back(cells[0]);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) fail(ErrorCode::kTooFewSamples, "need at least 2 days");
  for (std::size_t t = 1; t < dates.size(); ++t)
    if (!(dates[t - 1] < dates[t]))
      fail(ErrorCode::kNonMonotonicDates, "dates not strictly increasing at " + dates[t]);

  Matrix returns(m, rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t i = 0; i < m; ++i) returns(i, t) = rows[t][i];
  return ReturnsPanel(std::move(assets), std::move(dates), std::move(returns));
}

inline ReturnsPanel load_panel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  return parse_panel_csv(in);
}

// Inverse of parse_panel_csv; values are written with shortest round-trip
// formatting so save/load is a bitwise identity.
inline std::string to_csv(const ReturnsPanel& panel) {
  std::string out = "date";
  for (const std::string& a : panel.assets()) {
    out += ',';
    out += a;
  }
  out += '\n';
  for (std::size_t t = 0; t < panel.n_days(); ++t) {
    out += panel.dates()[t];
    for (std::size_t i = 0; i < panel.n_assets(); ++i) {
      out += ',';
      out += format_double(panel.returns()(i, t));
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Window handling.

struct WindowSpec {
  std::size_t train_start = 0;
  std::size_t train_len = 0;
  std::size_t test_len = 0;
};

struct WindowSlices {
  ReturnsPanel train;
  ReturnsPanel test;
};

namespace detail {

inline ReturnsPanel slice_columns(const ReturnsPanel& panel, std::size_t start,
                                  std::size_t len) {
  Matrix m(panel.n_assets(), len);
  for (std::size_t i = 0; i < panel.n_assets(); ++i)
    for (std::size_t t = 0; t < len; ++t) m(i, t) = panel.returns()(i, start + t);
  std::vector<std::string> dates(panel.dates().begin() + static_cast<std::ptrdiff_t>(start),
                                 panel.dates().begin() + static_cast<std::ptrdiff_t>(start + len));
  return ReturnsPanel(panel.assets(), std::move(dates), std::move(m));
}

}  // namespace detail

inline WindowSlices slice_window(const ReturnsPanel& panel, const WindowSpec& spec) {
  const std::size_t n = panel.n_days();
  if (spec.train_len < 2 || spec.test_len < 1)
    fail(ErrorCode::kWindowOutOfBounds, "train_len >= 2 and test_len >= 1 required");
  if (spec.train_start > n || spec.train_len > n - spec.train_start ||
      spec.test_len > n - spec.train_start - spec.train_len)
    fail(ErrorCode::kWindowOutOfBounds,
         "window [" + std::to_string(spec.train_start) + ", +" +
             std::to_string(spec.train_len) + " +" + std::to_string(spec.test_len) +
             ") exceeds " + std::to_string(n) + " days");
  return {detail::slice_columns(panel, spec.train_start, spec.train_len),
          detail::slice_columns(panel, spec.train_start + spec.train_len, spec.test_len)};
}

// ---------------------------------------------------------------------------
// Demeaning.

struct DemeanResult {
  ReturnsPanel panel;
  std::vector<double> means;  // per asset, in panel row order
};

// Subtracts each asset's in-window mean. Means are compensated sums, so the
// residual row means stay below 1e-14 of the row magnitude. A constant row's
// mean is taken as that constant so the residual is exactly zero.
inline DemeanResult demean(const ReturnsPanel& panel) {
  Matrix out = panel.returns();
  std::vector<double> means(panel.n_assets());
  for (std::size_t i = 0; i < panel.n_assets(); ++i) {
    const auto row = out.row_span(i);
    bool constant = true;
    for (double v : row)
      if (v != row[0]) {
        constant = false;
        break;
      }
    const double mu = constant ? row[0] : mean(row);
    means[i] = mu;
    for (std::size_t t = 0; t < panel.n_days(); ++t) out(i, t) -= mu;
  }
  return {ReturnsPanel(panel.assets(), panel.dates(), std::move(out)), std::move(means)};
}

}  // namespace covcraft
