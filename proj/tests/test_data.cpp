#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <filesystem>
#include <fstream>

#include "fdnet/data.hpp"
#include "fdnet/filters.hpp"
#include "helpers.hpp"

using namespace fdnet;

namespace {

// Deterministic CIFAR-format fixture: pseudo-random pixels, labels i % 10.
io::RawImages make_cifar_raw(int64_t n, uint64_t seed) {
  io::RawImages raw;
  raw.n = n;
  raw.c = 3;
  raw.h = 32;
  raw.w = 32;
  Rng rng(seed);
  raw.pixels.resize(static_cast<size_t>(n * 3 * 32 * 32));
  for (auto& p : raw.pixels) p = static_cast<uint8_t>(rng.below(256));
  for (int64_t i = 0; i < n; ++i) raw.labels.push_back(static_cast<int>(i % 10));
  return raw;
}

io::RawImages make_mnist_raw(int64_t n, uint64_t seed) {
  io::RawImages raw;
  raw.n = n;
  raw.c = 1;
  raw.h = 28;
  raw.w = 28;
  Rng rng(seed);
  raw.pixels.resize(static_cast<size_t>(n * 28 * 28));
  for (auto& p : raw.pixels) p = static_cast<uint8_t>(rng.below(256));
  for (int64_t i = 0; i < n; ++i) raw.labels.push_back(static_cast<int>(rng.below(10)));
  return raw;
}

std::vector<uint8_t> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("cifar10 loader: format contract against an independent byte-level parse") {
  auto dir = testutil::scratch_dir("cifar");
  auto raw = make_cifar_raw(40, 123);
  for (int b = 1; b <= 5; ++b) {
    io::write_cifar10_file((dir / ("data_batch_" + std::to_string(b) + ".bin")).string(), raw);
  }
  io::write_cifar10_file((dir / "test_batch.bin").string(), raw);

  auto [train, test] = load_cifar10<double>(dir.string());
  CHECK(train.images.shape() == Shape{200, 3, 32, 32});
  CHECK(test.images.shape() == Shape{40, 3, 32, 32});
  for (int l : train.labels) {
    CHECK(l >= 0);
    CHECK(l <= 9);
  }

  // Reference parse: direct offset arithmetic on the file bytes.
  const auto bytes = slurp((dir / "test_batch.bin").string());
  CHECK(bytes.size() == 40u * 3073u);
  for (int64_t rec : {0L, 7L, 39L}) {
    const uint8_t* r = bytes.data() + rec * 3073;
    CHECK(static_cast<int>(r[0]) == test.labels[static_cast<size_t>(rec)]);
    // Pixel (c,y,x) lives at 1 + c*1024 + y*32 + x, value scaled by 1/255.
    for (auto [c, y, x] : std::vector<std::array<int64_t, 3>>{{0, 0, 0}, {1, 5, 9}, {2, 31, 31}, {0, 16, 2}}) {
      const double want = static_cast<double>(r[1 + c * 1024 + y * 32 + x]) / 255.0;
      CHECK(test.images.at({rec, c, y, x}) == want);
    }
  }
}

TEST_CASE("cifar10 loader rejects wrong sizes and bad labels") {
  auto dir = testutil::scratch_dir("cifar_bad");
  {
    std::ofstream os(dir / "data_batch_1.bin", std::ios::binary);
    os << "short";
  }
  CHECK_THROWS_AS(io::read_cifar10_files({(dir / "data_batch_1.bin").string()}), DataError);

  auto raw = make_cifar_raw(2, 5);
  raw.labels[1] = 11;  // invalid
  std::vector<uint8_t> buf;
  for (int64_t r = 0; r < 2; ++r) {
    buf.push_back(static_cast<uint8_t>(raw.labels[static_cast<size_t>(r)]));
    buf.insert(buf.end(), raw.pixels.begin() + r * 3072, raw.pixels.begin() + (r + 1) * 3072);
  }
  {
    std::ofstream os(dir / "bad_label.bin", std::ios::binary);
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  CHECK_THROWS_AS(io::read_cifar10_files({(dir / "bad_label.bin").string()}), DataError);
  CHECK_THROWS_AS(io::read_cifar10_files({(dir / "missing.bin").string()}), DataError);
}

TEST_CASE("mnist idx loader: magics, shapes, and an independent histogram check") {
  auto dir = testutil::scratch_dir("mnist");
  auto train_raw = make_mnist_raw(60, 9);
  auto test_raw = make_mnist_raw(10, 10);
  io::write_idx_pair((dir / "train-images-idx3-ubyte").string(), (dir / "train-labels-idx1-ubyte").string(),
                     train_raw);
  io::write_idx_pair((dir / "t10k-images-idx3-ubyte").string(), (dir / "t10k-labels-idx1-ubyte").string(),
                     test_raw);

  auto [train, test] = load_mnist_idx<double>(dir.string());
  CHECK(train.images.shape() == Shape{60, 1, 28, 28});
  CHECK(test.images.shape() == Shape{10, 1, 28, 28});

  // Magic bytes straight off the files.
  const auto lab = slurp((dir / "train-labels-idx1-ubyte").string());
  CHECK(lab[0] == 0x00);
  CHECK(lab[1] == 0x00);
  CHECK(lab[2] == 0x08);
  CHECK(lab[3] == 0x01);
  const auto img = slurp((dir / "train-images-idx3-ubyte").string());
  CHECK(img[3] == 0x03);

  // Pixel histogram of the first image, independent parse at offset 16.
  std::array<int, 256> want{};
  for (int64_t i = 0; i < 28 * 28; ++i) want[img[static_cast<size_t>(16 + i)]]++;
  std::array<int, 256> got{};
  for (int64_t i = 0; i < 28 * 28; ++i) {
    got[static_cast<size_t>(train.images.values()[static_cast<size_t>(i)] * 255.0 + 0.5)]++;
  }
  CHECK(want == got);
}

TEST_CASE("mnist idx loader rejects bad magic and truncation") {
  auto dir = testutil::scratch_dir("mnist_bad");
  auto raw = make_mnist_raw(4, 2);
  io::write_idx_pair((dir / "img").string(), (dir / "lab").string(), raw);
  // Corrupt the image magic.
  {
    std::fstream f(dir / "img", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(3);
    const char b = 0x07;
    f.write(&b, 1);
  }
  CHECK_THROWS_AS(io::read_idx_pair((dir / "img").string(), (dir / "lab").string()), DataError);

  io::write_idx_pair((dir / "img2").string(), (dir / "lab2").string(), raw);
  std::filesystem::resize_file(dir / "img2", 16 + 100);  // truncate pixel data
  CHECK_THROWS_AS(io::read_idx_pair((dir / "img2").string(), (dir / "lab2").string()), DataError);
}

TEST_CASE("synthetic dataset: determinism, balance, and class frequency split") {
  auto [train, test] = make_synthetic_frequency_dataset<double>(60, 7);
  CHECK(train.size() == 4 * 48);
  CHECK(test.size() == 4 * 12);
  CHECK(train.size() + test.size() == 4 * 60);

  auto [train2, test2] = make_synthetic_frequency_dataset<double>(60, 7);
  CHECK(testutil::bitwise_equal(train.images, train2.images));
  CHECK(train.labels == train2.labels);
  CHECK(testutil::bitwise_equal(test.images, test2.images));

  // Class balance is exact.
  std::array<int, 4> counts{};
  for (int l : train.labels) counts[static_cast<size_t>(l)]++;
  for (int c = 0; c < 4; ++c) CHECK(counts[static_cast<size_t>(c)] == 48);

  // All pixels in [0,1].
  for (double v : train.images.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  // High-pass energy: class 0 (smooth) well below class 1 (checker).
  NoGradGuard ng;
  auto kernel = Tensor64::from({5}, gaussian_kernel_1d<double>(5, 1.0));
  std::array<double, 4> energy{};
  std::array<int64_t, 4> npx{};
  const int64_t img = 3 * 32 * 32;
  for (int64_t i = 0; i < train.size(); ++i) {
    auto x = Tensor64::zeros({1, 3, 32, 32});
    std::copy(train.images.values().begin() + i * img, train.images.values().begin() + (i + 1) * img,
              x.values_mut().begin());
    auto h = high_pass(x, kernel);
    double e = 0;
    for (double v : h.values()) e += v * v;
    energy[static_cast<size_t>(train.labels[static_cast<size_t>(i)])] += e;
    npx[static_cast<size_t>(train.labels[static_cast<size_t>(i)])] += img;
  }
  const double per_px_low = energy[0] / static_cast<double>(npx[0]);
  const double per_px_high = energy[1] / static_cast<double>(npx[1]);
  CHECK(per_px_low < 0.1 * per_px_high);
}

TEST_CASE("n_per_class below 50 is rejected") {
  CHECK_THROWS_AS(make_synthetic_frequency_dataset<double>(10, 0), DataError);
}

TEST_CASE("augment_and_batch: permutation only when flip_prob is zero") {
  auto [train, test] = make_synthetic_frequency_dataset<double>(50, 3);
  AugmentSpec spec;
  spec.flip_prob = 0.0;
  BatchStream<double> stream(train, spec, 32, /*seed=*/5, /*train=*/true);
  stream.begin_epoch();
  Tensor64 batch;
  std::vector<int> labels;
  int64_t seen = 0;
  const int64_t img = 3 * 32 * 32;
  while (stream.next(batch, labels)) {
    for (int64_t i = 0; i < batch.dim(0); ++i) {
      // Each batch image must be bit-identical to some source image with the
      // same label (it is a permutation, unflipped, unnormalized).
      bool found = false;
      for (int64_t j = 0; j < train.size() && !found; ++j) {
        if (train.labels[static_cast<size_t>(j)] != labels[static_cast<size_t>(i)]) continue;
        found = std::equal(batch.values().begin() + i * img, batch.values().begin() + (i + 1) * img,
                           train.images.values().begin() + j * img);
      }
      CHECK(found);
    }
    seen += batch.dim(0);
  }
  CHECK(seen == train.size());  // last partial batch kept
}

TEST_CASE("flip is an involution and never alters the label") {
  Rng rng(8);
  auto x = rand_uniform<double>({1, 3, 8, 8}, rng);
  auto y = x.clone_detached();
  hflip_image(y.values_mut().data(), 3, 8, 8);
  CHECK_FALSE(testutil::bitwise_equal(x, y));
  hflip_image(y.values_mut().data(), 3, 8, 8);
  CHECK(testutil::bitwise_equal(x, y));
}

TEST_CASE("normalization: invertible, and train-split stats give near-zero means") {
  auto [train, test] = make_synthetic_frequency_dataset<double>(50, 11);
  auto [mean, stddev] = channel_stats(train);
  AugmentSpec spec;
  spec.mean = mean;
  spec.std = stddev;

  auto normalized = normalize_images(train.images, spec);
  // Oracle: the stats were computed from this very split.
  const int64_t C = 3, HW = 32 * 32, N = train.size();
  for (int64_t c = 0; c < C; ++c) {
    double m = 0;
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t i = 0; i < HW; ++i) {
        m += normalized.values()[static_cast<size_t>((n * C + c) * HW + i)];
      }
    }
    m /= static_cast<double>(N * HW);
    CHECK(std::fabs(m) < 1e-3);
  }

  auto back = denormalize_images(normalized, spec);
  CHECK(testutil::max_abs_diff_t(back, train.images) < 1e-6);
}

TEST_CASE("epoch iteration is reproducible for a fixed seed") {
  auto [train, test] = make_synthetic_frequency_dataset<double>(50, 13);
  AugmentSpec spec;
  spec.flip_prob = 0.5;
  auto run = [&]() {
    BatchStream<double> stream(train, spec, 16, 99, true);
    std::vector<double> sums;
    Tensor64 batch;
    std::vector<int> labels;
    for (int epoch = 0; epoch < 2; ++epoch) {
      stream.begin_epoch();
      while (stream.next(batch, labels)) {
        double s = 0;
        for (double v : batch.values()) s += v;
        sums.push_back(s);
      }
    }
    return sums;
  };
  CHECK(run() == run());
}

TEST_CASE("take_prefix keeps the first samples") {
  auto [train, test] = make_synthetic_frequency_dataset<double>(50, 17);
  auto sub = take_prefix(train, 64);
  CHECK(sub.size() == 64);
  CHECK(std::equal(sub.labels.begin(), sub.labels.end(), train.labels.begin()));
  CHECK_THROWS_AS(take_prefix(train, 0), DataError);
}
