#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "gcpn/data/time_series.hpp"

using namespace gcpn;
using namespace gcpn::data;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("gcpn_data_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream os(path);
  for (const auto& l : lines) os << l << "\n";
}

}  // namespace

TEST(LoadSeries, FortyEightHourlyValues) {
  TempDir dir;
  std::vector<std::string> lines;
  for (int i = 0; i < 48; ++i) lines.push_back(std::to_string(0.5 + i));
  write_lines(dir.file("d.txt"), lines);
  const TimeSeries ts = load_series(dir.file("d.txt"), SeriesKind::demand);
  EXPECT_EQ(ts.length(), 48u);
  EXPECT_DOUBLE_EQ(ts[47], 47.5);
}

TEST(LoadSeries, TwoColumnTimestampTable) {
  TempDir dir;
  std::vector<std::string> lines = {"# label=wind"};
  for (int i = 0; i < 24; ++i) lines.push_back("2021-01-01T" + std::to_string(i) + ":00," + std::to_string(i));
  write_lines(dir.file("w.txt"), lines);
  const TimeSeries ts = load_series(dir.file("w.txt"), SeriesKind::wind);
  EXPECT_EQ(ts.length(), 24u);
  EXPECT_DOUBLE_EQ(ts[23], 23.0);
}

TEST(LoadSeries, NegativeValueRejectedWithRowIndex) {
  TempDir dir;
  std::vector<std::string> lines(30, "1.0");
  lines[5] = "-1";
  write_lines(dir.file("bad.txt"), lines);
  try {
    load_series(dir.file("bad.txt"), SeriesKind::demand);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 5"), std::string::npos) << msg;
    EXPECT_NE(msg.find(":6"), std::string::npos) << msg;
  }
}

TEST(LoadSeries, NaNAndGarbageAndEmptyRejected) {
  TempDir dir;
  std::vector<std::string> lines(30, "1.0");
  lines[2] = "nan";
  write_lines(dir.file("nan.txt"), lines);
  EXPECT_THROW(load_series(dir.file("nan.txt"), SeriesKind::demand), ParseError);
  lines[2] = "abc";
  write_lines(dir.file("abc.txt"), lines);
  EXPECT_THROW(load_series(dir.file("abc.txt"), SeriesKind::demand), ParseError);
  write_lines(dir.file("empty.txt"), {});
  EXPECT_THROW(load_series(dir.file("empty.txt"), SeriesKind::demand), ParseError);
  write_lines(dir.file("short.txt"), std::vector<std::string>(10, "1"));
  EXPECT_THROW(load_series(dir.file("short.txt"), SeriesKind::demand), ParseError);
}

TEST(LoadSeries, LabelMismatchRejected) {
  TempDir dir;
  std::vector<std::string> lines = {"# label=wind"};
  lines.resize(25, "1");
  write_lines(dir.file("x.txt"), lines);
  EXPECT_THROW(load_series(dir.file("x.txt"), SeriesKind::demand), ParseError);
}

TEST(LoadSeries, PropertySaveThenLoadIsIdentity) {
  TempDir dir;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    for (auto kind : {SeriesKind::demand, SeriesKind::wind}) {
      const TimeSeries ts = synth_series(rng, kind, 3 + seed);
      save_series(dir.file("rt.txt"), ts);
      const TimeSeries back = load_series(dir.file("rt.txt"), kind);
      EXPECT_EQ(back.values, ts.values);
    }
  }
}

TEST(SynthSeries, OneDayIsTwentyFourHours) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(synth_series(rng, SeriesKind::demand, 1).length(), 24u);
  EXPECT_EQ(synth_series(rng, SeriesKind::wind, 1).length(), 24u);
}

TEST(SynthSeries, SameSeedSameSeries) {
  std::mt19937_64 a(42), b(42);
  EXPECT_EQ(synth_series(a, SeriesKind::wind, 10).values, synth_series(b, SeriesKind::wind, 10).values);
}

TEST(SynthSeries, YearOfDemandAveragesNearBase) {
  SynthParams p;
  p.demand_base = 2.5;
  std::mt19937_64 rng(8);
  const TimeSeries ts = synth_series(rng, SeriesKind::demand, 365, p);
  const double mean = std::accumulate(ts.values.begin(), ts.values.end(), 0.0) / ts.length();
  EXPECT_NEAR(mean, p.demand_base, 0.1 * p.demand_base);
}

TEST(SynthSeries, DiurnalShapeIsZeroMeanOverADay) {
  double s = 0;
  for (int h = 0; h < 24; ++h) s += diurnal_shape(h);
  EXPECT_NEAR(s, 0.0, 1e-12);
  EXPECT_GT(diurnal_shape(19), diurnal_shape(3));
}

TEST(SynthSeries, PropertyNonnegativeForManySeedsEvenWithWildParameters) {
  SynthParams p;
  p.demand_noise = 2.0;
  p.wind_mean = 0.1;
  p.wind_sigma = 1.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    for (auto kind : {SeriesKind::demand, SeriesKind::wind}) {
      const TimeSeries ts = synth_series(rng, kind, 7, p);
      for (double v : ts.values) ASSERT_GE(v, 0.0);
    }
  }
}

TEST(Sites, DirectoryLayoutRoundTrip) {
  TempDir dir;
  const auto sites = synth_sites(3, 2, {SynthParams{}, SynthParams{}});
  save_sites(dir.str(), sites);
  EXPECT_TRUE(std::filesystem::exists(dir.str() + "/demand/microgrid_1.txt"));
  const auto back = load_sites(dir.str(), 2);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].wind.values, sites[1].wind.values);
}
