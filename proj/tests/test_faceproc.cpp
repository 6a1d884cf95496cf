#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "ctface/error.hpp"
#include "ctface/faceproc.hpp"
#include "test_support.hpp"

using namespace ctface;

namespace {

DepthImage blank(int w, int h) {
    DepthImage img;
    img.width = w;
    img.height = h;
    img.depth.assign(static_cast<std::size_t>(w) * h, 0.0);
    return img;
}

DepthImage from_rows(const std::vector<std::string>& rows) {
    DepthImage img = blank(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) img.at(x, y) = rows[y][x] == '#' ? 50.0 : 0.0;
    return img;
}

DepthImage random_blobs(Rng& rng, int w, int h, double density) {
    DepthImage img = blank(w, h);
    for (double& d : img.depth)
        if (rng.uniform01() < density) d = rng.uniform(10, 200);
    return img;
}

}  // namespace

TEST_CASE("normalization worked example") {
    DepthImage img = blank(3, 1);
    img.depth = {80, 110, 140};
    const DepthImage n = normalize_depth(img, 80.0, 255.0);
    CHECK(n.depth[0] == 0.0);
    CHECK(n.depth[1] == doctest::Approx(127.5).epsilon(1e-12));
    CHECK(n.depth[2] == 255.0);
    CHECK(n.stage == Stage::Normalized);
}

TEST_CASE("normalized values stay in [0, C] with the peak exactly at C") {
    Rng rng(11);
    for (int t = 0; t < 100; ++t) {
        DepthImage img = random_blobs(rng, 20, 15, 0.6);
        img.depth[0] = 1.0;  // guarantees a foreground pixel below the threshold
        const double c = rng.uniform(1, 1000);
        const double theta = rng.uniform(0, 150);
        const DepthImage n = normalize_depth(img, theta, c);
        double peak = 0.0;
        for (std::size_t i = 0; i < n.depth.size(); ++i) {
            CHECK(n.depth[i] >= 0.0);
            CHECK(n.depth[i] <= c);
            if (img.depth[i] == 0.0) CHECK(n.depth[i] == 0.0);
            if (img.depth[i] > 0.0 && img.depth[i] <= theta) CHECK(n.depth[i] == 0.0);
            peak = std::max(peak, n.depth[i]);
        }
        CHECK(peak == c);
    }
}

TEST_CASE("normalization is idempotent with theta zero") {
    Rng rng(12);
    for (int t = 0; t < 50; ++t) {
        const DepthImage img = random_blobs(rng, 16, 16, 0.5);
        const DepthImage once = normalize_depth(img, rng.uniform(0, 5), 255.0);
        const DepthImage twice = normalize_depth(once, 0.0, 255.0);
        for (std::size_t i = 0; i < once.depth.size(); ++i) CHECK(twice.depth[i] == doctest::Approx(once.depth[i]));
    }
}

TEST_CASE("degenerate contrast is reported") {
    DepthImage img = blank(2, 1);
    img.depth = {40, 40};
    CHECK_THROWS_AS(normalize_depth(img, 40.0), Error);
    CHECK_THROWS_AS(normalize_depth(img, 50.0), Error);
    CHECK_THROWS_AS(normalize_depth(img, 10.0, 0.0), Error);
    CHECK_THROWS_AS(normalize_depth(blank(3, 3), 0.0), Error);
}

TEST_CASE("baseline mask keeps the largest component and fills its holes") {
    const DepthImage img = from_rows({
        "#.........",
        "..#####...",
        "..#...#..#",
        "..#.#.#..#",
        "..#####...",
        "..........",
    });
    const FaceMask m = baseline_face_mask(img);
    CHECK(m.area() == 20);
    CHECK(m.at(3, 2));
    CHECK(m.at(4, 3));
    CHECK_FALSE(m.at(0, 0));
    CHECK_FALSE(m.at(9, 2));
    const DepthImage seg = apply_mask(img, m);
    CHECK(seg.stage == Stage::Segmented);
    CHECK(seg.at(0, 0) == 0.0);
    CHECK(seg.at(2, 1) == 50.0);
    CHECK(seg.at(3, 2) == 0.0);  // filled holes carry no depth
}

TEST_CASE("a gap touching the border is not a hole; ties go to the first component") {
    const DepthImage img = from_rows({
        "###.###",
        "#.#.#..",
        "###.###",
    });
    const FaceMask m = baseline_face_mask(img);
    CHECK(m.at(1, 1));
    CHECK(m.at(0, 0));
    CHECK_FALSE(m.at(4, 0));
    CHECK_FALSE(m.at(5, 1));
    CHECK(m.area() == 9);
}

TEST_CASE("mask properties on random images") {
    Rng rng(13);
    for (int t = 0; t < 100; ++t) {
        const DepthImage img = random_blobs(rng, 24, 18, rng.uniform(0.2, 0.8));
        const FaceMask m = baseline_face_mask(img);
        REQUIRE(m.width == img.width);
        REQUIRE(m.height == img.height);
        const DepthImage seg = apply_mask(img, m);
        // applying a mask only removes pixels; segmenting again is a fixed point
        for (std::size_t i = 0; i < img.depth.size(); ++i) CHECK((seg.depth[i] == 0.0 || seg.depth[i] == img.depth[i]));
        const FaceMask again = baseline_face_mask(seg);
        CHECK(again.mask == m.mask);
        CHECK(m.area() >= seg.foreground_count());
    }
    CHECK_THROWS_AS(baseline_face_mask(blank(4, 4)), Error);
}

TEST_CASE("mask size must match the image") {
    const DepthImage img = blank(4, 4);
    FaceMask wrong;
    wrong.width = 3;
    wrong.height = 4;
    wrong.mask.assign(12, 1);
    CHECK_THROWS(apply_mask(img, wrong));
}

TEST_CASE("display mapping and histogram") {
    DepthImage img = blank(4, 1);
    img.depth = {0, 10, 20, 30};
    const DisplayMapping map = DisplayMapping::from_foreground(img);
    CHECK(map.lo == 10.0);
    CHECK(map.hi == 30.0);
    CHECK(map.map(20.0) == doctest::Approx(127.5));
    CHECK(map.map(5.0) == 0.0);
    CHECK(map.map(40.0) == 255.0);
    CHECK(map.unmap(map.map(25.0)) == doctest::Approx(25.0));

    const Histogram fg = depth_histogram(img, true);
    CHECK(fg.counts.size() == 256);
    CHECK(fg.bin_edges.size() == 257);
    CHECK(fg.total() == 3);
    CHECK(fg.counts[0] == 1);
    CHECK(fg.counts[255] == 1);
    CHECK(depth_histogram(img, false).total() == 4);

    Rng rng(14);
    const DepthImage r = random_blobs(rng, 30, 30, 0.5);
    CHECK(depth_histogram(r, true).total() == static_cast<std::int64_t>(r.foreground_count()));

    const auto dir = test::scratch_dir("faceproc_hist");
    save_histogram_csv(fg, dir / "h.csv");
    std::ifstream in(dir / "h.csv");
    std::string line;
    int lines = 0;
    std::getline(in, line);
    CHECK(line == "bin_low,count");
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 256);
}

TEST_CASE("threshold selection uses the nearest-rank percentile") {
    DepthImage img = blank(100, 1);
    for (int i = 0; i < 100; ++i) img.depth[i] = 100.0 + i;
    CHECK(select_threshold(img, 1.0) == doctest::Approx(100.0));
    CHECK(select_threshold(img, 50.0) == doctest::Approx(149.0));
    CHECK(select_threshold(img, 100.0) == doctest::Approx(199.0));
    CHECK_THROWS(select_threshold(img, 101.0));
    CHECK_THROWS(select_threshold(blank(2, 2), 1.0));
}
