#include "test_support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include <unistd.h>

#include "harmony/data/shapes.hpp"
#include "harmony/model/layers.hpp"
#include "harmony/model/network.hpp"
#include "harmony/model/train.hpp"
#include "harmony/model/zoo.hpp"

namespace harmony::testkit {

TempDir::TempDir(const std::string& prefix) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          (prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
           std::to_string(rd() % 100000));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                          double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

Dataset small_shapes(int n, std::uint64_t seed, Split split) {
  ShapesParams p;
  p.n = n;
  p.num_classes = 3;
  p.side = 16;
  p.seed = seed;
  p.split = split;
  return generate_shapes_dataset(p);
}

const ClassifierAdapter& trained_small_cnn(int train_n, int epochs) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, ClassifierAdapter> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find({train_n, epochs});
  if (it == cache.end()) {
    ClassifierAdapter a = build_toy_cnn(CnnSize::kSmall, toy_input_spec(3, 16), 3, 5, "cnn-small");
    TrainConfig tc;
    tc.epochs = epochs;
    tc.seed = 9;
    train(a, small_shapes(train_n, 1, Split::kTrain), tc);
    it = cache.emplace(std::make_pair(train_n, epochs), std::move(a)).first;
  }
  return it->second;
}

CamFixture cam_fixture(int side, int num_classes, std::uint64_t seed) {
  CamFixture f;
  f.side = side;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.6);
  auto draw = [&](std::size_t count) {
    std::vector<double> v(count);
    for (double& x : v) x = n(rng);
    return v;
  };
  f.conv_weight = draw(18);
  f.conv_bias = draw(2);
  f.head_weight = draw(static_cast<std::size_t>(num_classes) * 2);
  f.head_bias = draw(static_cast<std::size_t>(num_classes));

  Rng init(0);
  Network net;
  net.add("conv", std::make_unique<Conv2d>(1, 2, 3, 2, 1, init));
  net.add("features", std::make_unique<Gelu>(), true);
  net.add("gap", std::make_unique<GlobalAvgPool>());
  net.add("head", std::make_unique<Linear>(2, num_classes, init));
  for (auto& p : net.parameters()) {
    const std::vector<double>& src = p.name == "conv.weight"   ? f.conv_weight
                                     : p.name == "conv.bias"   ? f.conv_bias
                                     : p.name == "head.weight" ? f.head_weight
                                                               : f.head_bias;
    p.param->value.storage() = src;
  }
  ModelManifest m;
  m.model_id = "cam-fixture";
  m.variant = "custom";
  m.input_spec.channels = 1;
  m.input_spec.height = side;
  m.input_spec.width = side;
  m.num_classes = num_classes;
  f.model = ClassifierAdapter(m, std::move(net));
  return f;
}

namespace {

double gelu(double x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

// Half-pixel bilinear sample positions with edge clamping.
void bilinear_taps(int in, int out, std::vector<int>& i0, std::vector<int>& i1, std::vector<double>& t) {
  i0.resize(out);
  i1.resize(out);
  t.resize(out);
  for (int o = 0; o < out; ++o) {
    const double src = std::clamp((o + 0.5) * in / out - 0.5, 0.0, in - 1.0);
    i0[o] = static_cast<int>(src);
    i1[o] = std::min(i0[o] + 1, in - 1);
    t[o] = src - i0[o];
  }
}

}  // namespace

std::vector<double> grad_cam_oracle(const CamFixture& f, const ImageTensor& x, int label,
                                    bool finite_differences) {
  const int s = f.side;
  const int o = (s + 2 - 3) / 2 + 1;
  std::vector<double> act(2 * o * o);
  for (int k = 0; k < 2; ++k)
    for (int oy = 0; oy < o; ++oy)
      for (int ox = 0; ox < o; ++ox) {
        double z = f.conv_bias[k];
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            const int iy = 2 * oy - 1 + ky, ix = 2 * ox - 1 + kx;
            if (iy >= 0 && iy < s && ix >= 0 && ix < s) z += f.conv_weight[k * 9 + ky * 3 + kx] * x.at(0, iy, ix);
          }
        act[(k * o + oy) * o + ox] = gelu(z);
      }
  // logit_c = b_c + sum_k W_ck mean(A_k), so dlogit/dA_k is W_ck / (o*o) everywhere.
  auto logit = [&](const std::vector<double>& a) {
    double z = f.head_bias[label];
    for (int k = 0; k < 2; ++k) {
      double mean = 0;
      for (int i = 0; i < o * o; ++i) mean += a[k * o * o + i];
      z += f.head_weight[label * 2 + k] * mean / (o * o);
    }
    return z;
  };
  std::vector<double> raw(o * o, 0.0);
  for (int k = 0; k < 2; ++k) {
    double alpha = 0;
    if (finite_differences) {
      const auto g = numeric_gradient(logit, act, 1e-4);
      for (int i = 0; i < o * o; ++i) alpha += g[k * o * o + i];
      alpha /= o * o;
    } else {
      alpha = f.head_weight[label * 2 + k] / (o * o);
    }
    for (int i = 0; i < o * o; ++i) raw[i] += alpha * act[k * o * o + i];
  }
  for (double& v : raw) v = std::max(v, 0.0);

  std::vector<int> r0, r1, c0, c1;
  std::vector<double> rt, ct;
  bilinear_taps(o, s, r0, r1, rt);
  bilinear_taps(o, s, c0, c1, ct);
  std::vector<double> up(s * s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) {
      auto at = [&](int r, int c) { return raw[r * o + c]; };
      const double top = (1 - ct[j]) * at(r0[i], c0[j]) + ct[j] * at(r0[i], c1[j]);
      const double bottom = (1 - ct[j]) * at(r1[i], c0[j]) + ct[j] * at(r1[i], c1[j]);
      up[i * s + j] = (1 - rt[i]) * top + rt[i] * bottom;
    }
  const double lo = *std::min_element(up.begin(), up.end());
  const double hi = *std::max_element(up.begin(), up.end());
  for (double& v : up) v = hi > 0 ? (hi > lo ? (v - lo) / (hi - lo) : 1.0) : 0.0;
  return up;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path test_data(const std::string& relative) {
  return std::filesystem::path(HARMONY_TEST_DATA_DIR) / relative;
}

}  // namespace harmony::testkit
