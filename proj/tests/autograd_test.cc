// tests/autograd_test.cc

// Copyright 2026  The InterBias Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "interbias/autograd.hpp"

#include <cmath>
#include <functional>

#include "gtest/gtest.h"
#include "interbias/rng.hpp"

namespace interbias {
namespace {

Matrix random_matrix(int r, int c, SplitMix64& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.next_normal() * scale;
  return m;
}

// Scalar objective: weighted sum of the graph output, weights fixed per test.
double weighted_sum(const Matrix& y, const Matrix& w) {
  double s = 0.0;
  for (size_t i = 0; i < y.data().size(); ++i) s += y.data()[i] * w.data()[i];
  return s;
}

// Checks d(weighted_sum(graph(inputs)))/d(inputs) against central differences.
void check_graph(const std::vector<Matrix>& inputs,
                 const std::function<int(Tape&, const std::vector<int>&)>& build,
                 double tol = 1e-6) {
  Tape tape;
  std::vector<int> ids;
  for (const Matrix& m : inputs) ids.push_back(tape.input(m));
  int out = build(tape, ids);
  SplitMix64 wrng(555);
  Matrix w = random_matrix(tape.value(out).rows(), tape.value(out).cols(), wrng);
  tape.add_grad(out, w);
  tape.backward();

  const double h = 1e-6;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (size_t j = 0; j < inputs[i].data().size(); ++j) {
      auto eval = [&](double delta) {
        std::vector<Matrix> shifted = inputs;
        shifted[i].data()[j] += delta;
        Tape t2;
        std::vector<int> ids2;
        for (const Matrix& m : shifted) ids2.push_back(t2.input(m));
        return weighted_sum(t2.value(build(t2, ids2)), w);
      };
      double fd = (eval(h) - eval(-h)) / (2 * h);
      double an = tape.grad(ids[i]).data()[j];
      EXPECT_NEAR(an, fd, tol * std::max(1.0, std::abs(fd)))
          << "input " << i << " element " << j;
    }
  }
}

TEST(Autograd, Matmul) {
  SplitMix64 rng(1);
  check_graph({random_matrix(3, 4, rng), random_matrix(4, 2, rng)},
              [](Tape& t, const std::vector<int>& in) {
                return t.matmul(in[0], in[1]);
              });
}

TEST(Autograd, MatmulNT) {
  SplitMix64 rng(2);
  check_graph({random_matrix(3, 4, rng), random_matrix(5, 4, rng)},
              [](Tape& t, const std::vector<int>& in) {
                return t.matmul_nt(in[0], in[1]);
              });
}

TEST(Autograd, AddAndScale) {
  SplitMix64 rng(3);
  check_graph({random_matrix(3, 3, rng), random_matrix(3, 3, rng)},
              [](Tape& t, const std::vector<int>& in) {
                return t.scale(t.add(in[0], in[1]), 0.37);
              });
}

TEST(Autograd, AddRowBroadcast) {
  SplitMix64 rng(4);
  check_graph({random_matrix(4, 3, rng), random_matrix(1, 3, rng)},
              [](Tape& t, const std::vector<int>& in) {
                return t.add_row_broadcast(in[0], in[1]);
              });
}

TEST(Autograd, Relu) {
  SplitMix64 rng(5);
  // Keep values away from the kink so central differences are valid.
  Matrix x = random_matrix(4, 4, rng);
  for (double& v : x.data())
    if (std::abs(v) < 0.05) v = 0.2;
  check_graph({x}, [](Tape& t, const std::vector<int>& in) {
    return t.relu(in[0]);
  });
}

TEST(Autograd, RowSoftmax) {
  SplitMix64 rng(6);
  check_graph({random_matrix(3, 5, rng)},
              [](Tape& t, const std::vector<int>& in) {
                return t.row_softmax(in[0]);
              });
}

TEST(Autograd, LayerNorm) {
  SplitMix64 rng(7);
  Matrix gamma = random_matrix(1, 6, rng, 0.5);
  for (double& v : gamma.data()) v += 1.0;
  check_graph({random_matrix(4, 6, rng), gamma, random_matrix(1, 6, rng)},
              [](Tape& t, const std::vector<int>& in) {
                return t.layer_norm(in[0], in[1], in[2]);
              },
              1e-5);
}

TEST(Autograd, AttentionComposite) {
  SplitMix64 rng(8);
  int T = 4, D = 6;
  check_graph({random_matrix(T, D, rng, 0.5), random_matrix(D, D, rng, 0.5),
               random_matrix(D, D, rng, 0.5), random_matrix(D, D, rng, 0.5),
               random_matrix(D, D, rng, 0.5)},
              [D](Tape& t, const std::vector<int>& in) {
                int q = t.matmul(in[0], in[1]);
                int k = t.matmul(in[0], in[2]);
                int v = t.matmul(in[0], in[3]);
                int s = t.scale(t.matmul_nt(q, k), 1.0 / std::sqrt(double(D)));
                int a = t.row_softmax(s);
                return t.matmul(t.matmul(a, v), in[4]);
              },
              1e-5);
}

TEST(Autograd, GradAccumulatesAcrossReuse) {
  // y = x + x ⇒ dy/dx = 2.
  Tape t;
  Matrix x(2, 2, 1.5);
  int xi = t.input(x);
  int y = t.add(xi, xi);
  Matrix g(2, 2, 1.0);
  t.add_grad(y, g);
  t.backward();
  for (double v : t.grad(xi).data()) EXPECT_DOUBLE_EQ(v, 2.0);
}

}  // namespace
}  // namespace interbias
