#include "suplab/errors.hpp"
#include "suplab/plot.hpp"

#include <doctest.h>

#include <cmath>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

using namespace suplab;

namespace {

ExperimentResult sample_result() {
  ExperimentResult r;
  r.experiment = "demo";
  r.axis_names = {"k", "width"};
  const double ks[] = {10, 40, 160, 640};
  for (double w : {8.0, 64.0}) {
    for (double k : ks) {
      const double m = w / std::sqrt(k);
      r.rows.push_back({{k, w}, "error", m, 0.8 * m, 1.3 * m, 50});
    }
  }
  r.provenance.seed = 1;
  return r;
}

double attr(const std::string& svg, const std::string& name) {
  const std::regex re(name + "=\"([^\"]+)\"");
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, re));
  return std::stod(m[1]);
}

std::size_t count(const std::string& svg, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = svg.find(needle); p != std::string::npos; p = svg.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_SUITE("plot") {
  TEST_CASE("identical input gives identical bytes") {
    for (auto kind : {PlotKind::line, PlotKind::band, PlotKind::hist}) {
      CHECK(render_svg(sample_result(), kind) == render_svg(sample_result(), kind));
    }
  }

  TEST_CASE("single-point series has one marker and no band") {
    ExperimentResult r;
    r.experiment = "one";
    r.axis_names = {"x"};
    r.rows.push_back({{3.0}, "m", 0.5, 0.4, 0.6, 10});
    const std::string svg = render_svg(r, PlotKind::band);
    CHECK(count(svg, "class=\"marker\"") == 1);
    CHECK(count(svg, "class=\"band\"") == 0);
    CHECK(count(svg, "class=\"line\"") == 0);
  }

  TEST_CASE("band edges map back to the CI columns") {
    const auto result = sample_result();
    const std::string svg = render_svg(result, PlotKind::band, {.metric = "error", .x_axis = "k"});
    CHECK(count(svg, "class=\"band\"") == 2);
    const double ymin = attr(svg, "data-ymin"), ymax = attr(svg, "data-ymax");
    const double top = attr(svg, "data-top"), bottom = attr(svg, "data-bottom");
    const bool log_y = attr(svg, "data-log-y") == 1.0;
    CHECK(log_y);
    auto invert = [&](double py) {
      const double t = (bottom - py) / (bottom - top);
      return log_y ? std::pow(10.0, std::log10(ymin) + t * (std::log10(ymax) - std::log10(ymin))) : ymin + t * (ymax - ymin);
    };
    const std::regex poly("class=\"band\"[^>]*points=\"([^\"]+)\"");
    std::size_t series = 0;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), poly); it != std::sregex_iterator(); ++it, ++series) {
      std::istringstream pts((*it)[1].str());
      std::vector<double> ys;
      std::string pair;
      while (pts >> pair) ys.push_back(std::stod(pair.substr(pair.find(',') + 1)));
      REQUIRE(ys.size() == 8);
      const double w = series == 0 ? 8.0 : 64.0;
      const double ks[] = {10, 40, 160, 640};
      for (std::size_t i = 0; i < 4; ++i) {
        const auto* row = result.find("error", std::vector<double>{ks[i], w});
        REQUIRE(row);
        CHECK(invert(ys[i]) == doctest::Approx(row->ci_high).epsilon(1e-5));
        CHECK(invert(ys[7 - i]) == doctest::Approx(row->ci_low).epsilon(1e-5));
      }
    }
    CHECK(series == 2);
  }

  TEST_CASE("linear axes when the range is narrow") {
    ExperimentResult r;
    r.experiment = "lin";
    r.axis_names = {"x"};
    for (double x : {1.0, 2.0, 3.0}) r.rows.push_back({{x}, "m", x, x - 0.5, x + 0.5, 5});
    const std::string svg = render_svg(r, PlotKind::line);
    CHECK(attr(svg, "data-log-x") == 0.0);
    CHECK(attr(svg, "data-log-y") == 0.0);
    CHECK(count(svg, "class=\"whisker\"") == 3);
    CHECK(count(svg, "class=\"marker\"") == 3);
  }

  TEST_CASE("hist draws one bar per point") {
    const std::string svg = render_svg(sample_result(), PlotKind::hist);
    CHECK(count(svg, "class=\"bar\"") == 8);
  }

  TEST_CASE("errors") {
    ExperimentResult empty;
    empty.experiment = "e";
    CHECK_THROWS_AS(emit_plot(empty, PlotKind::line, "/tmp/never.svg"), DataError);
    CHECK_THROWS_AS(render_svg(sample_result(), PlotKind::line, {.metric = "absent"}), DataError);
    CHECK_THROWS_AS(render_svg(sample_result(), PlotKind::line, {.x_axis = "absent"}), ConfigError);
    CHECK_THROWS_AS(parse_plot_kind("pie"), ConfigError);
    CHECK(parse_plot_kind("band") == PlotKind::band);
  }
}
