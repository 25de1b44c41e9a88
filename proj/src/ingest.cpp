#include "jlsgev/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

#include "jlsgev/csv.hpp"
#include "jlsgev/errors.hpp"

namespace jlsgev {

namespace {

constexpr double kEarthRadiusKm = 6371.0088;
constexpr double kDeg = std::numbers::pi / 180.0;

bool tenths_element(const std::string& e) {
  return e == "PRCP" || e == "TAVG" || e == "TMAX" || e == "TMIN";
}

int parse_date_ym(const std::string& s, int& day, const std::string& ctx) {
  // ISO YYYY-MM-DD
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
    throw IoError("bad date '" + s + "' at " + ctx);
  }
  const int y = static_cast<int>(csv::parse_long(s.substr(0, 4), ctx));
  const int m = static_cast<int>(csv::parse_long(s.substr(5, 2), ctx));
  day = static_cast<int>(csv::parse_long(s.substr(8, 2), ctx));
  if (m < 1 || m > 12 || day < 1 || day > 31) {
    throw IoError("out-of-range date '" + s + "' at " + ctx);
  }
  return y * 12 + (m - 1);
}

}  // namespace

std::vector<DailyRecord> read_ghcnd_csv(const std::string& path,
                                        const std::string& element) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<DailyRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const auto f = csv::split(line);
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (!saw_header) {
      if (f.size() < 6 || f[0] != "station") {
        throw IoError(ctx + ": expected header starting with 'station'");
      }
      saw_header = true;
      continue;
    }
    if (f.size() != 6 && f.size() != 7) {
      throw IoError(ctx + ": expected 6 or 7 fields, got " +
                    std::to_string(f.size()));
    }
    if (f.size() == 7 && !f[6].empty()) continue;  // quality-flagged
    if (f[4] != element) continue;
    DailyRecord r;
    r.station = f[0];
    r.lat = csv::parse_double(f[1], ctx);
    r.lon = csv::parse_double(f[2], ctx);
    r.ym = parse_date_ym(f[3], r.day, ctx);
    const double raw = csv::parse_double(f[5], ctx);
    if (std::isnan(raw) || raw == -9999.0) continue;
    r.value = tenths_element(element) ? raw / 10.0 : raw;
    out.push_back(std::move(r));
  }
  if (!saw_header) throw IoError(path + ": empty file");
  return out;
}

std::vector<StationMaxima> block_maxima(const std::vector<DailyRecord>& records,
                                        int min_days) {
  if (min_days < 1) throw ValidationError("block_maxima: min_days must be >= 1");
  struct MonthAcc {
    double max = -std::numeric_limits<double>::infinity();
    std::set<int> days;
  };
  struct StationAcc {
    double lat = 0.0, lon = 0.0;
    std::map<int, MonthAcc> months;
  };
  std::map<std::string, StationAcc> acc;
  for (const auto& r : records) {
    auto& st = acc[r.station];
    st.lat = r.lat;
    st.lon = r.lon;
    auto& m = st.months[r.ym];
    m.max = std::max(m.max, r.value);
    m.days.insert(r.day);
  }
  std::vector<StationMaxima> out;
  for (const auto& [id, st] : acc) {
    StationMaxima sm;
    sm.id = id;
    sm.lat = st.lat;
    sm.lon = st.lon;
    for (const auto& [ym, m] : st.months) {
      if (static_cast<int>(m.days.size()) >= min_days) sm.monthly[ym] = m.max;
    }
    if (!sm.monthly.empty()) out.push_back(std::move(sm));
  }
  return out;
}

Eigen::Vector2d project_km(double lat, double lon, double lat0, double lon0) {
  return {kEarthRadiusKm * std::cos(lat0 * kDeg) * (lon - lon0) * kDeg,
          kEarthRadiusKm * (lat - lat0) * kDeg};
}

void unproject_km(const Eigen::Vector2d& xy, double lat0, double lon0,
                  double& lat, double& lon) {
  lon = lon0 + xy.x() / (kEarthRadiusKm * std::cos(lat0 * kDeg)) / kDeg;
  lat = lat0 + xy.y() / kEarthRadiusKm / kDeg;
}

namespace {

ProcessData to_process(const std::vector<StationMaxima>& series, int ym_first,
                       int ym_last, double lat0, double lon0,
                       const char* tag) {
  ProcessData p;
  const int T = ym_last - ym_first + 1;
  std::vector<const StationMaxima*> kept;
  for (const auto& s : series) {
    bool any = false;
    for (const auto& [ym, v] : s.monthly) {
      (void)v;
      if (ym >= ym_first && ym <= ym_last) {
        any = true;
        break;
      }
    }
    if (any) kept.push_back(&s);
  }
  if (kept.empty()) {
    throw ValidationError(std::string(tag) +
                          ": no stations left after month filtering");
  }
  p.obs = Eigen::MatrixXd::Constant(kept.size(), T,
                                    std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    p.site_ids.push_back(kept[i]->id);
    p.locations.push_back(project_km(kept[i]->lat, kept[i]->lon, lat0, lon0));
    for (const auto& [ym, v] : kept[i]->monthly) {
      if (ym >= ym_first && ym <= ym_last) p.obs(i, ym - ym_first) = v;
    }
  }
  return p;
}

}  // namespace

AssembledDataset assemble_dataset(const std::vector<StationMaxima>& series1,
                                  const std::vector<StationMaxima>& series2) {
  if (series1.empty() || series2.empty()) {
    throw ValidationError("assemble_dataset: a process has no stations");
  }
  const auto range_of = [](const std::vector<StationMaxima>& s) {
    int lo = std::numeric_limits<int>::max();
    int hi = std::numeric_limits<int>::min();
    for (const auto& st : s) {
      lo = std::min(lo, st.monthly.begin()->first);
      hi = std::max(hi, st.monthly.rbegin()->first);
    }
    return std::pair<int, int>{lo, hi};
  };
  const auto [lo1, hi1] = range_of(series1);
  const auto [lo2, hi2] = range_of(series2);
  AssembledDataset out;
  out.ym_first = std::max(lo1, lo2);
  out.ym_last = std::min(hi1, hi2);
  if (out.ym_first > out.ym_last) {
    throw ValidationError("assemble_dataset: month ranges do not overlap");
  }
  double lat_sum = 0.0, lon_sum = 0.0;
  for (const auto& s : series1) { lat_sum += s.lat; lon_sum += s.lon; }
  for (const auto& s : series2) { lat_sum += s.lat; lon_sum += s.lon; }
  const double n = static_cast<double>(series1.size() + series2.size());
  out.lat0 = lat_sum / n;
  out.lon0 = lon_sum / n;
  out.data.z1 = to_process(series1, out.ym_first, out.ym_last, out.lat0,
                           out.lon0, "process 1");
  out.data.z2 = to_process(series2, out.ym_first, out.ym_last, out.lat0,
                           out.lon0, "process 2");
  out.data.validate();
  return out;
}

ProcessData read_process_csv(const std::string& path) {
  const csv::Table t = csv::read_table(path);
  if (t.header.size() < 4 || t.header[0] != "site" || t.header[1] != "x" ||
      t.header[2] != "y") {
    throw IoError(path + ": expected header site,x,y,rep_*");
  }
  const int reps = static_cast<int>(t.header.size()) - 3;
  ProcessData p;
  p.obs.resize(t.rows.size(), reps);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const std::string ctx = path + " row " + std::to_string(i + 2);
    p.site_ids.push_back(r[0]);
    p.locations.emplace_back(csv::parse_double(r[1], ctx),
                             csv::parse_double(r[2], ctx));
    for (int j = 0; j < reps; ++j) {
      p.obs(i, j) = csv::parse_double(r[3 + j], ctx);
    }
  }
  return p;
}

void write_process_csv(const std::string& path, const ProcessData& p) {
  std::vector<std::string> lines;
  std::string header = "site,x,y";
  for (int j = 0; j < p.obs.cols(); ++j) {
    header += ",rep_" + std::to_string(j + 1);
  }
  lines.push_back(std::move(header));
  for (int i = 0; i < p.n_sites(); ++i) {
    std::string row = p.site_ids[i];
    row += ',' + csv::format_double(p.locations[i].x());
    row += ',' + csv::format_double(p.locations[i].y());
    for (int j = 0; j < p.obs.cols(); ++j) {
      row += ',' + csv::format_double(p.obs(i, j));
    }
    lines.push_back(std::move(row));
  }
  csv::write_lines(path, lines);
}

}  // namespace jlsgev
