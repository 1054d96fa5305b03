#include <chrono>
#include <cmath>

#include <gtest/gtest.h>

#include "gsrnn/gsrnn.hpp"
#include "test_util.hpp"

using namespace gsrnn;
using namespace std::chrono;

namespace {

std::string small_csv() {
  return "region_id,year,epiweek,activity\n"
         "1,2013,1,1.5\n1,2013,2,2\n1,2013,3,2.25\n"
         "2,2013,1,0.5\n2,2013,2,0.75\n2,2013,3,1\n";
}

TimeSeriesPanel ramp_panel(std::size_t weeks, std::size_t nodes) {
  TimeSeriesPanel p;
  EpiWeek w{2010, 1};
  for (std::size_t t = 0; t < weeks; ++t, w = epiweek::next(w)) p.weeks.push_back(w);
  for (std::size_t i = 0; i < nodes; ++i) {
    p.node_ids.push_back(static_cast<int>(i) + 1);
    std::vector<double> s;
    for (std::size_t t = 0; t < weeks; ++t) s.push_back(static_cast<double>(t + 10 * i));
    p.values.push_back(s);
  }
  return p;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Epiweek, CalendarAgreesWithPublishedWeekTable) {
  // MMWR week 1 of 2013 ended Saturday 2013-01-05.
  EXPECT_EQ(epiweek::end_date({2013, 1}), year{2013} / January / 5);
  EXPECT_EQ(epiweek::of_date(year{2013} / January / 19), (EpiWeek{2013, 3}));
  EXPECT_EQ(epiweek::of_date(year{2015} / August / 15), (EpiWeek{2015, 32}));
  EXPECT_EQ(epiweek::end_date({2015, 32}), year{2015} / August / 15);
  // Dec 31 2014 falls in 2014 week 53; Jan 1 2012 (a Sunday) starts 2012 week 1.
  EXPECT_EQ(epiweek::of_date(year{2014} / December / 31), (EpiWeek{2014, 53}));
  EXPECT_EQ(epiweek::of_date(year{2012} / January / 1), (EpiWeek{2012, 1}));
  // Jan 1 2016 (a Friday) still belongs to 2015 week 52.
  EXPECT_EQ(epiweek::of_date(year{2016} / January / 1), (EpiWeek{2015, 52}));
  for (int y : {2008, 2014, 2020}) EXPECT_EQ(epiweek::weeks_in_year(y), 53) << y;
  for (int y : {2009, 2010, 2011, 2012, 2013, 2015, 2016, 2019}) EXPECT_EQ(epiweek::weeks_in_year(y), 52) << y;
}

TEST(Epiweek, NextAndPrevAreInverse) {
  EpiWeek w{2000, 1};
  for (int k = 0; k < 2000; ++k) {
    const EpiWeek n = epiweek::next(w);
    EXPECT_EQ(epiweek::prev(n), w);
    EXPECT_EQ(epiweek::end_date(n), year_month_day{sys_days{epiweek::end_date(w)} + days{7}});
    w = n;
  }
}

TEST(Epiweek, Parse) {
  EXPECT_EQ(epiweek::parse("2013:3"), (EpiWeek{2013, 3}));
  EXPECT_EQ(epiweek::parse("2014:53"), (EpiWeek{2014, 53}));
  EXPECT_THROW(epiweek::parse("2013:53"), structural_error);
  EXPECT_THROW(epiweek::parse("2013-3"), structural_error);
  EXPECT_THROW(epiweek::parse("2013:3x"), structural_error);
}

TEST(LoadPanel, CompleteFile) {
  const TimeSeriesPanel p = load_panel(small_csv());
  EXPECT_EQ(p.length(), 3u);
  EXPECT_EQ(p.node_ids, (std::vector<int>{1, 2}));
  EXPECT_EQ(p.series(2)[1], 0.75);
}

TEST(LoadPanel, MissingRowIsGapNamingTheCell) {
  std::string csv = small_csv();
  const auto pos = csv.find("2,2013,2,0.75\n");
  csv.erase(pos, std::string("2,2013,2,0.75\n").size());
  try {
    load_panel(csv);
    FAIL();
  } catch (const gap_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("region 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2013:2"), std::string::npos) << msg;
  }
}

TEST(LoadPanel, FiftyThreeWeekYearIsContiguous) {
  const TimeSeriesPanel p = load_panel(
      "region_id,year,epiweek,activity\n1,2014,52,1\n1,2014,53,2\n1,2015,1,3\n");
  EXPECT_EQ(p.length(), 3u);
  EXPECT_EQ(p.weeks[2], (EpiWeek{2015, 1}));
  EXPECT_THROW(load_panel("region_id,year,epiweek,activity\n1,2013,52,1\n1,2013,53,2\n1,2014,1,3\n"), parse_error);
}

TEST(LoadPanel, NonNumericActivityReportsLine) {
  std::string csv = small_csv();
  csv.replace(csv.find("2.25"), 4, "abc");
  try {
    load_panel(csv);
    FAIL();
  } catch (const parse_error& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(LoadPanel, DuplicateCell) {
  EXPECT_THROW(load_panel(small_csv() + "1,2013,2,9\n"), duplicate_error);
}

TEST(LoadPanel, BadHeaderAndNegativeValues) {
  EXPECT_THROW(load_panel("region,year,week,value\n"), parse_error);
  EXPECT_THROW(load_panel("region_id,year,epiweek,activity\n1,2013,1,-1\n"), parse_error);
}

TEST(SavePanel, CanonicalRoundTripIsByteIdentical) {
  const std::string csv = small_csv();
  EXPECT_EQ(save_panel(load_panel(csv)), csv);
  const TimeSeriesPanel s = synth_panel(gsrnn::test::hhs_graph(), 60, 0.5, 0.05, 4);
  const std::string canon = save_panel(s);
  EXPECT_EQ(save_panel(load_panel(canon)), canon);
}

TEST(SavePanel, UnsortedInputIsCanonicalized) {
  const std::string shuffled =
      "region_id,year,epiweek,activity\n2,2013,3,1\n1,2013,2,2\n2,2013,1,0.5\n1,2013,1,1.5\n"
      "2,2013,2,0.75\n1,2013,3,2.25\n";
  EXPECT_EQ(save_panel(load_panel(shuffled)), small_csv());
}

TEST(Split, PublishedTestPeriodHas135Weeks) {
  TimeSeriesPanel p;
  p.node_ids = {1};
  p.values.emplace_back();
  for (EpiWeek w{2010, 40};; w = epiweek::next(w)) {
    p.weeks.push_back(w);
    p.values[0].push_back(1.0);
    if (epiweek::end_date(w) == year{2015} / August / 15) break;
  }
  const EpiWeek first_test = epiweek::of_date(year{2013} / January / 19);
  const auto [train, test] = split(p, first_test);
  EXPECT_EQ(test.length(), 135u);
  EXPECT_EQ(train.weeks.back(), epiweek::prev(first_test));
}

TEST(Split, Boundaries) {
  const TimeSeriesPanel p = ramp_panel(10, 2);
  EXPECT_THROW(split(p, p.weeks.front()), structural_error);
  EXPECT_EQ(split(p, p.weeks.back()).second.length(), 1u);
  EXPECT_THROW(split(p, EpiWeek{2030, 1}), structural_error);
  EXPECT_THROW(split(p, EpiWeek{2000, 1}), structural_error);
}

TEST(Scaler, InverseOfTransform) {
  const TimeSeriesPanel p = synth_panel(gsrnn::test::path_graph(4), 50, 0.5, 0.1, 2);
  const Scaler s = Scaler::fit(p);
  for (std::size_t i = 0; i < 4; ++i)
    for (double x : p.values[i]) EXPECT_NEAR(s.inverse(i, s.transform(i, x)), x, 1e-12);
}

TEST(Scaler, DegenerateNodeMapsToHalf) {
  TimeSeriesPanel p = ramp_panel(5, 1);
  p.values[0].assign(5, 2.0);
  const Scaler s = Scaler::fit(p);
  EXPECT_EQ(s.transform(0, 2.0), 0.5);
  EXPECT_EQ(s.transform(0, 7.0), 0.5);
}

TEST(Windows, CountAndAlignment) {
  const TimeSeriesPanel p = ramp_panel(10, 2);
  const Scaler s = Scaler::fit(p);
  const WindowedDataset d = make_windows(p, 2, s);
  ASSERT_EQ(d.size(), 8u);
  // first sample: features weeks 1,2 (values 0,1), target week 3 (value 2)
  EXPECT_EQ(d.samples[0].t, 2u);
  EXPECT_EQ(d.samples[0].features[0], (std::vector<double>{s.transform(0, 0), s.transform(0, 1)}));
  EXPECT_EQ(d.samples[0].target[0], 2.0);
  EXPECT_EQ(d.samples[0].target_scaled[1], s.transform(1, 12.0));
}

TEST(Windows, ScaledFeaturesWithinUnitInterval) {
  const TimeSeriesPanel p = synth_panel(gsrnn::test::hhs_graph(), 80, 0.5, 0.2, 3);
  const WindowedDataset d = make_windows(p, 3, Scaler::fit(p));
  for (const Sample& s : d.samples)
    for (const auto& f : s.features)
      for (double v : f) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
}

TEST(Windows, NeverLeakTargetWeeks) {
  const TimeSeriesPanel p = synth_panel(gsrnn::test::path_graph(3), 40, 0.5, 0.2, 3);
  for (std::size_t L : {1u, 2u, 5u}) {
    const WindowedDataset d = make_windows(p, L, Scaler::fit(p));
    EXPECT_EQ(d.size(), p.length() - L);
    for (const Sample& s : d.samples) {
      EXPECT_EQ(p.weeks[s.t], s.week);
      // feature k comes from week index t - L + k < t
      for (std::size_t i = 0; i < p.node_count(); ++i)
        for (std::size_t k = 0; k < L; ++k)
          EXPECT_EQ(s.features[i][k], Scaler::fit(p).transform(i, p.values[i][s.t - L + k]));
    }
  }
}

TEST(Windows, TooShortIsStructural) {
  const TimeSeriesPanel p = ramp_panel(2, 1);
  EXPECT_THROW(make_windows(p, 2, Scaler::fit(p)), structural_error);
}

TEST(Synth, UncoupledNoiselessIsPeriodic) {
  const TimeSeriesPanel p = synth_panel(gsrnn::test::path_graph(3), 160, 0.0, 0.0, 5);
  for (const auto& s : p.values)
    for (std::size_t t = 0; t + 52 < s.size(); ++t) EXPECT_NEAR(s[t], s[t + 52], 1e-12);
}

TEST(Synth, SeededAndDeterministic) {
  const RegionGraph g = gsrnn::test::hhs_graph();
  EXPECT_EQ(synth_panel(g, 50, 0.5, 0.05, 9), synth_panel(g, 50, 0.5, 0.05, 9));
  EXPECT_NE(synth_panel(g, 50, 0.5, 0.05, 9), synth_panel(g, 50, 0.5, 0.05, 10));
}

TEST(Synth, RejectsInvalidParameters) {
  const RegionGraph g = gsrnn::test::path_graph(3);
  EXPECT_THROW(synth_panel(g, 10, 0.5, 0.1, 1), structural_error);
  EXPECT_THROW(synth_panel(g, 50, 1.0, 0.1, 1), structural_error);
  EXPECT_THROW(synth_panel(g, 50, 0.5, -0.1, 1), structural_error);
}

TEST(Synth, CouplingFavoursNeighbourLags) {
  const RegionGraph g = gsrnn::test::hhs_graph();
  const TimeSeriesPanel p = synth_panel(g, 500, 0.5, 0.05, 2024);
  double gap = 0.0;
  for (int i = 1; i <= 10; ++i) {
    const auto nb = g.neighbors(i);
    std::vector<int> far;
    for (int j = 1; j <= 10; ++j)
      if (j != i && std::find(nb.begin(), nb.end(), j) == nb.end()) far.push_back(j);
    auto lag_mean = [&](const std::vector<int>& set) {
      std::vector<double> m;
      for (std::size_t t = 1; t < p.length(); ++t) {
        double s = 0;
        for (int j : set) s += p.series(j)[t - 1];
        m.push_back(s / set.size());
      }
      return m;
    };
    const std::vector<double> own(p.series(i).begin() + 1, p.series(i).end());
    gap += pearson(own, lag_mean(nb)) - pearson(own, lag_mean(far));
  }
  EXPECT_GT(gap / 10.0, 0.1);
}
