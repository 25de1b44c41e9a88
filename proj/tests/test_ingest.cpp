#include "jlsgev/ingest.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "jlsgev/errors.hpp"
#include "jlsgev/rng.hpp"

namespace jlsgev {
namespace {

std::string write_file(const std::string& name, const std::string& body) {
  const std::string path = ::testing::TempDir() + name;
  std::ofstream out(path, std::ios::trunc);
  out << body;
  return path;
}

template <class Fn>
std::string io_error_message(Fn fn) {
  try {
    fn();
  } catch (const IoError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected IoError";
  return "";
}

DailyRecord daily(const std::string& st, int ym, int day, double value) {
  DailyRecord r;
  r.station = st;
  r.lat = 40.0;
  r.lon = -105.0;
  r.ym = ym;
  r.day = day;
  r.value = value;
  return r;
}

TEST(GhcndReader, FiltersConvertsAndKeepsElement) {
  const std::string path = write_file("ghcnd_ok.csv",
      "station,lat,lon,date,element,value,qflag\n"
      "USW001,40.25,-105.5,2001-01-05,PRCP,250,\n"
      "USW001,40.25,-105.5,2001-01-06,PRCP,-9999,\n"
      "USW001,40.25,-105.5,2001-01-07,PRCP,130,X\n"
      "USW001,40.25,-105.5,2001-01-08,TMAX,300,\n"
      "USW002,41.0,-104.0,2001-02-03,PRCP,55,\n"
      "USW002,41.0,-104.0,2001-02-04,SNWD,47,\n");

  const auto prcp = read_ghcnd_csv(path, "PRCP");
  ASSERT_EQ(prcp.size(), 2u);  // sentinel and flagged rows dropped
  EXPECT_EQ(prcp[0].station, "USW001");
  EXPECT_DOUBLE_EQ(prcp[0].lat, 40.25);
  EXPECT_DOUBLE_EQ(prcp[0].lon, -105.5);
  EXPECT_EQ(prcp[0].ym, 2001 * 12 + 0);
  EXPECT_EQ(prcp[0].day, 5);
  EXPECT_DOUBLE_EQ(prcp[0].value, 25.0);  // tenths of mm
  EXPECT_EQ(prcp[1].station, "USW002");
  EXPECT_EQ(prcp[1].ym, 2001 * 12 + 1);
  EXPECT_DOUBLE_EQ(prcp[1].value, 5.5);

  const auto tmax = read_ghcnd_csv(path, "TMAX");
  ASSERT_EQ(tmax.size(), 1u);
  EXPECT_DOUBLE_EQ(tmax[0].value, 30.0);  // tenths of deg C

  const auto snwd = read_ghcnd_csv(path, "SNWD");
  ASSERT_EQ(snwd.size(), 1u);
  EXPECT_DOUBLE_EQ(snwd[0].value, 47.0);  // mm, no conversion
}

TEST(GhcndReader, FailsFastWithLineNumbers) {
  const std::string bad_fields = write_file("ghcnd_fields.csv",
      "station,lat,lon,date,element,value,qflag\n"
      "USW001,40.0,-105.0,2001-01-05,PRCP,250,\n"
      "USW001,40.0,-105.0,2001-01-06\n");
  const std::string msg1 =
      io_error_message([&] { read_ghcnd_csv(bad_fields, "PRCP"); });
  EXPECT_NE(msg1.find(":3"), std::string::npos) << msg1;

  const std::string bad_date = write_file("ghcnd_date.csv",
      "station,lat,lon,date,element,value,qflag\n"
      "USW001,40.0,-105.0,2001-13-05,PRCP,250,\n");
  const std::string msg2 =
      io_error_message([&] { read_ghcnd_csv(bad_date, "PRCP"); });
  EXPECT_NE(msg2.find(":2"), std::string::npos) << msg2;

  const std::string bad_header =
      write_file("ghcnd_header.csv", "id,lat,lon,date,element,value,qflag\n");
  EXPECT_THROW(read_ghcnd_csv(bad_header, "PRCP"), IoError);
  EXPECT_THROW(read_ghcnd_csv(::testing::TempDir() + "ghcnd_missing.csv",
                              "PRCP"),
               IoError);
  const std::string empty = write_file("ghcnd_empty.csv", "");
  EXPECT_THROW(read_ghcnd_csv(empty, "PRCP"), IoError);
}

TEST(BlockMaxima, MonthCompletenessAndDuplicateDays) {
  std::vector<DailyRecord> recs;
  for (int d = 1; d <= 25; ++d) recs.push_back(daily("A", 100, d, d * 1.0));
  for (int d = 1; d <= 10; ++d) recs.push_back(daily("A", 101, d, 1000.0));
  // Station B: one physical day repeated 30 times never reaches min_days.
  for (int k = 0; k < 30; ++k) recs.push_back(daily("B", 100, 1, k * 1.0));
  // Station C: duplicates collapse to their max but count one day each.
  for (int d = 1; d <= 20; ++d) recs.push_back(daily("C", 100, d, 5.0));
  recs.push_back(daily("C", 100, 3, 99.0));

  const auto out = block_maxima(recs, 20);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].id, "A");
  ASSERT_EQ(out[0].monthly.size(), 1u);  // short month absent, not imputed
  EXPECT_DOUBLE_EQ(out[0].monthly.at(100), 25.0);
  EXPECT_EQ(out[0].monthly.count(101), 0u);
  EXPECT_EQ(out[1].id, "C");
  EXPECT_DOUBLE_EQ(out[1].monthly.at(100), 99.0);

  // min_days = 1 keeps everything, including station B.
  const auto loose = block_maxima(recs, 1);
  ASSERT_EQ(loose.size(), 3u);
  EXPECT_DOUBLE_EQ(loose[1].monthly.at(100), 29.0);  // max over duplicates
  EXPECT_DOUBLE_EQ(loose[0].monthly.at(101), 1000.0);

  EXPECT_THROW(block_maxima(recs, 0), ValidationError);
}

TEST(BlockMaxima, InvariantToRowOrder) {
  std::vector<DailyRecord> recs;
  Rng rng(5);
  for (int d = 1; d <= 24; ++d) {
    recs.push_back(daily("S1", 200, d, rng.normal()));
    recs.push_back(daily("S2", 200, d, rng.normal() + 3.0));
    recs.push_back(daily("S2", 201, d, rng.normal()));
  }
  const auto base = block_maxima(recs, 20);

  std::vector<DailyRecord> shuffled = recs;
  std::reverse(shuffled.begin(), shuffled.end());
  std::rotate(shuffled.begin(), shuffled.begin() + 17, shuffled.end());
  const auto other = block_maxima(shuffled, 20);

  ASSERT_EQ(base.size(), other.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_EQ(base[i].id, other[i].id);
    EXPECT_EQ(base[i].lat, other[i].lat);
    EXPECT_EQ(base[i].monthly, other[i].monthly);
  }
}

TEST(Projection, RoundtripsToSmallAngleAccuracy) {
  const double lat0 = 39.7, lon0 = -104.9;
  EXPECT_NEAR(project_km(lat0, lon0, lat0, lon0).norm(), 0.0, 1e-12);
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    const double lat = lat0 + 4.0 * (rng.uniform() - 0.5);
    const double lon = lon0 + 6.0 * (rng.uniform() - 0.5);
    const Eigen::Vector2d xy = project_km(lat, lon, lat0, lon0);
    double lat_back = 0.0, lon_back = 0.0;
    unproject_km(xy, lat0, lon0, lat_back, lon_back);
    EXPECT_NEAR(lat_back, lat, 1e-9);
    EXPECT_NEAR(lon_back, lon, 1e-9);
  }
  // One degree of latitude is about 111.2 km on this sphere.
  EXPECT_NEAR(project_km(lat0 + 1.0, lon0, lat0, lon0).y(), 111.195, 0.01);
}

StationMaxima station(const std::string& id, double lat, double lon,
                      int ym_lo, int ym_hi, double value) {
  StationMaxima s;
  s.id = id;
  s.lat = lat;
  s.lon = lon;
  for (int ym = ym_lo; ym <= ym_hi; ++ym) {
    s.monthly[ym] = value + (ym - ym_lo);
  }
  return s;
}

TEST(AssembleDataset, AlignsOnMonthIntersection) {
  const std::vector<StationMaxima> s1 = {
      station("p1a", 40.0, -105.0, 10, 30, 1.0),
      station("p1b", 40.5, -105.5, 5, 15, 100.0),
      station("p1c", 41.0, -106.0, 0, 3, -1.0),  // outside the intersection
  };
  const std::vector<StationMaxima> s2 = {
      station("p2a", 40.2, -105.2, 12, 40, 50.0),
  };
  const AssembledDataset a = assemble_dataset(s1, s2);
  EXPECT_EQ(a.ym_first, 12);
  EXPECT_EQ(a.ym_last, 30);
  ASSERT_EQ(a.data.z1.n_sites(), 2);  // p1c dropped
  ASSERT_EQ(a.data.z2.n_sites(), 1);
  EXPECT_EQ(a.data.z1.obs.cols(), 19);
  EXPECT_EQ(a.data.z1.site_ids[0], "p1a");

  // p1a covers the full window: column t holds the ym_first + t maximum.
  EXPECT_DOUBLE_EQ(a.data.z1.obs(0, 0), 1.0 + (12 - 10));
  EXPECT_DOUBLE_EQ(a.data.z1.obs(0, 18), 1.0 + (30 - 10));
  // p1b ends at ym 15: columns past that are missing.
  EXPECT_DOUBLE_EQ(a.data.z1.obs(1, 3), 100.0 + (15 - 5));
  EXPECT_TRUE(std::isnan(a.data.z1.obs(1, 4)));
  EXPECT_DOUBLE_EQ(a.data.z2.obs(0, 0), 50.0);

  // Pooled centroid over the four input stations becomes the origin.
  const double lat0 = (40.0 + 40.5 + 41.0 + 40.2) / 4.0;
  EXPECT_NEAR(a.lat0, lat0, 1e-12);
  double lat = 0.0, lon = 0.0;
  unproject_km(a.data.z1.locations[0], a.lat0, a.lon0, lat, lon);
  EXPECT_NEAR(lat, 40.0, 1e-9);
  EXPECT_NEAR(lon, -105.0, 1e-9);
}

TEST(AssembleDataset, RejectsDisjointOrEmptyInput) {
  const std::vector<StationMaxima> early = {
      station("a", 40.0, -105.0, 0, 10, 1.0)};
  const std::vector<StationMaxima> late = {
      station("b", 40.0, -105.0, 20, 30, 1.0)};
  EXPECT_THROW(assemble_dataset(early, late), ValidationError);
  EXPECT_THROW(assemble_dataset({}, late), ValidationError);
  EXPECT_THROW(assemble_dataset(early, {}), ValidationError);
}

TEST(ProcessCsvIo, RoundtripsBitExactlyWithMissingCells) {
  ProcessData p;
  p.site_ids = {"s1", "s2"};
  p.locations = {{0.12345678901234567, -3.5}, {2.0, 1.0e-17}};
  p.obs.resize(2, 3);
  p.obs << 1.0 / 3.0, std::numeric_limits<double>::quiet_NaN(), 1e300,
      -0.75, 2.5000000000000004, -1e-300;
  const std::string path = ::testing::TempDir() + "jlsgev_process.csv";
  write_process_csv(path, p);
  const ProcessData q = read_process_csv(path);
  ASSERT_EQ(q.n_sites(), 2);
  EXPECT_EQ(q.site_ids, p.site_ids);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(q.locations[i].x(), p.locations[i].x());
    EXPECT_EQ(q.locations[i].y(), p.locations[i].y());
  }
  ASSERT_EQ(q.obs.cols(), 3);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (std::isnan(p.obs(i, j))) {
        EXPECT_TRUE(std::isnan(q.obs(i, j)));
      } else {
        EXPECT_EQ(q.obs(i, j), p.obs(i, j));
      }
    }
  }

  const std::string bad = write_file("process_bad.csv", "id,x,y,rep_1\n");
  EXPECT_THROW(read_process_csv(bad), IoError);
}

}  // namespace
}  // namespace jlsgev
