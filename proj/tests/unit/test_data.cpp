#include <stdexcept>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "fgpac/data.hpp"
#include "fgpac/pipeline.hpp"

using namespace fgpac;
using doctest::Approx;

namespace {

void put_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

// Three 2x2 images with labels 0, 2, 1.
void write_idx_fixture(const std::filesystem::path& images, const std::filesystem::path& labels) {
  std::ofstream img(images, std::ios::binary);
  put_be32(img, 0x803);
  put_be32(img, 3);
  put_be32(img, 2);
  put_be32(img, 2);
  const unsigned char pixels[12] = {0, 255, 0, 0, 255, 255, 255, 255, 51, 0, 0, 0};
  img.write(reinterpret_cast<const char*>(pixels), 12);
  std::ofstream lab(labels, std::ios::binary);
  put_be32(lab, 0x801);
  put_be32(lab, 3);
  const unsigned char ys[3] = {0, 2, 1};
  lab.write(reinterpret_cast<const char*>(ys), 3);
}

double row_norm(const Dataset& d, std::size_t i) {
  double s = 0.0;
  for (double v : d.row(i)) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("dataset invariants") {
    CHECK_THROWS(Dataset({}, 2, {}, 2));
    CHECK_THROWS(Dataset({0.1, 0.2}, 2, {3}, 2));
    CHECK_THROWS(Dataset({1.0, 1.0}, 2, {0}, 2));
    CHECK_THROWS(Dataset({0.1, 0.2, 0.3}, 2, {0}, 2));
    const Dataset d({0.6, 0.8}, 2, {1}, 2);
    CHECK(d.size() == 1);
    CHECK(d.example(0).label == 1);
  }

  TEST_CASE("unit-ball projection") {
    std::vector<double> a = {3.0, 4.0};
    project_to_unit_ball(a);
    CHECK(a[0] == Approx(0.6));
    std::vector<double> b = {0.3, 0.4};
    project_to_unit_ball(b);
    CHECK(b[0] == 0.3);
  }

  TEST_CASE("IDX fixture") {
    const auto dir = std::filesystem::temp_directory_path() / "fgpac_idx_test";
    std::filesystem::create_directories(dir);
    write_idx_fixture(dir / "img", dir / "lab");
    const Dataset d = load_idx(dir / "img", dir / "lab");
    CHECK(d.size() == 3);
    CHECK(d.cols() == 4);
    CHECK(d.class_count() == 3);
    CHECK(d.labels() == std::vector<int>{0, 2, 1});
    CHECK(d.row(0)[1] == 1.0);
    CHECK(row_norm(d, 1) == Approx(1.0));  // four full pixels projected to the sphere
    CHECK(d.row(2)[0] == Approx(0.2));
    CHECK(d.fingerprint() != 0);
    // Swapped files and truncation are rejected.
    CHECK_THROWS(load_idx(dir / "lab", dir / "img"));
    std::filesystem::resize_file(dir / "img", 20);
    CHECK_THROWS(load_idx(dir / "img", dir / "lab"));
    CHECK_THROWS(load_idx(dir / "missing", dir / "lab"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("sparse text parsing") {
    const Dataset d = parse_sparse_text("+1 1:2 3:1\n-1 2:4\n\n# comment\n+1 1:1 2:2 3:0.5\n", 3);
    CHECK(d.size() == 3);
    CHECK(d.class_count() == 2);
    CHECK(d.labels() == std::vector<int>{1, 0, 1});
    // Min-max scaling, then projection.
    CHECK(d.row(0)[0] == Approx(1.0 / std::sqrt(2.0)));
    CHECK(d.row(1)[1] == Approx(1.0));
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(row_norm(d, i) <= 1.0 + 1e-12);
    const Dataset raw = parse_sparse_text("1 1:0.5\n2 1:0.25\n", 2, {.minmax = false});
    CHECK(raw.row(0)[0] == 0.5);
    CHECK(raw.row(0)[1] == 0.0);
    CHECK_THROWS(parse_sparse_text("1 4:1\n", 3));
    CHECK_THROWS(parse_sparse_text("1 0:1\n", 3));
    CHECK_THROWS(parse_sparse_text("1 1=1\n", 3));
    CHECK_THROWS(parse_sparse_text("x 1:1\n", 3));
    CHECK_THROWS(parse_sparse_text("\n", 3));
  }

  TEST_CASE("splits are seeded partitions") {
    const Dataset d = synth_gaussian_blobs(101, 3, 2, 1.0, 1);
    const SplitPair a = split_half(d, 7);
    const SplitPair b = split_half(d, 7);
    CHECK(a.first.size() == 51);
    CHECK(a.second.size() == 50);
    CHECK(a.first.source_indices() == b.first.source_indices());
    CHECK(a.first.tag() == SplitTag::Cert);
    CHECK(a.second.tag() == SplitTag::Test);
    std::set<std::size_t> all(a.first.source_indices().begin(), a.first.source_indices().end());
    all.insert(a.second.source_indices().begin(), a.second.source_indices().end());
    CHECK(all.size() == 101);
    CHECK(split_half(d, 8).first.source_indices() != a.first.source_indices());

    const SplitPair p = split_prior(a.first, 0.3, 2);
    CHECK(p.first.size() == 15);
    CHECK(p.second.size() == 36);
    CHECK(p.first.tag() == SplitTag::Prior);
    CHECK_THROWS(split_prior(a.first, 0.0, 2));
    CHECK_THROWS(split_prior(a.first, 1.0, 2));
  }

  TEST_CASE("blob distribution") {
    const BlobDistribution dist(6, 3, 2.0, 5);
    const Dataset a = dist.sample(300, 1);
    CHECK(a.size() == 300);
    CHECK(a.class_count() == 3);
    int counts[3] = {0, 0, 0};
    for (int y : a.labels()) ++counts[y];
    CHECK(counts[0] == 100);
    CHECK(counts[2] == 100);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(row_norm(a, i) <= 1.0 + 1e-12);
    CHECK(dist.sample(300, 1).features() == a.features());
    CHECK(dist.sample(300, 2).features() != a.features());
  }

  TEST_CASE("fingerprint") {
    const std::vector<std::uint8_t> bytes = {'a'};
    CHECK(fnv1a64(bytes) == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
  }

  TEST_CASE("benchmark registry") {
    CHECK(dataset_spec("mushrooms").features == 98);
    CHECK(dataset_spec("mnist").idx);
    CHECK_THROWS_AS(dataset_spec("iris"), std::invalid_argument);
    CHECK_THROWS_AS(load_benchmark("yeast", "/nonexistent", 0), std::runtime_error);
  }
}
