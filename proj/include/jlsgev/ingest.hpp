#pragma once

#include <map>
#include <string>
#include <vector>

#include "jlsgev/dataset.hpp"

namespace jlsgev {

// Daily observation after unit conversion (tenths already divided out for
// PRCP/TAVG/TMAX/TMIN). ym = year*12 + (month-1).
struct DailyRecord {
  std::string station;
  double lat = 0.0, lon = 0.0;
  int ym = 0;
  int day = 1;
  double value = 0.0;
};

// Reads `station,lat,lon,date,element,value[,qflag]` rows, keeping only the
// requested element. Quality-flagged rows and -9999 sentinels are dropped;
// malformed rows fail fast with the line number.
std::vector<DailyRecord> read_ghcnd_csv(const std::string& path,
                                        const std::string& element);

struct StationMaxima {
  std::string id;
  double lat = 0.0, lon = 0.0;
  std::map<int, double> monthly;  // ym -> block maximum
};

// Monthly block maxima; months with fewer than min_days distinct days are
// dropped. Duplicate (station, date) rows collapse to their max and count as
// one day.
std::vector<StationMaxima> block_maxima(const std::vector<DailyRecord>& records,
                                        int min_days = 20);

// Equirectangular km projection about (lat0, lon0).
Eigen::Vector2d project_km(double lat, double lon, double lat0, double lon0);
void unproject_km(const Eigen::Vector2d& xy, double lat0, double lon0,
                  double& lat, double& lon);

struct AssembledDataset {
  Dataset data;
  int ym_first = 0, ym_last = 0;  // shared replicate columns
  double lat0 = 0.0, lon0 = 0.0;  // projection origin (pooled centroid)
};

// Aligns both processes on the intersection of their month ranges; stations
// with no surviving month are dropped. Empty intersections or empty station
// lists are rejected.
AssembledDataset assemble_dataset(const std::vector<StationMaxima>& series1,
                                  const std::vector<StationMaxima>& series2);

// Dataset process serialization shared with the simulation exports:
// `site,x,y,rep_1..rep_T`, empty cell = missing, doubles round-trip
// bit-exactly.
ProcessData read_process_csv(const std::string& path);
void write_process_csv(const std::string& path, const ProcessData& p);

}  // namespace jlsgev
