// interbias/autograd.hpp

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

// Minimal reverse-mode tape over Matrix values. The op set is exactly what
// the encoder needs: matmul (plain and A·Bᵀ), elementwise add, row-broadcast
// bias, scalar scale, relu, row softmax and layer norm. Gradients from
// outside the tape (the CTC loss) are injected with add_grad before calling
// backward().

#ifndef INTERBIAS_AUTOGRAD_HPP_
#define INTERBIAS_AUTOGRAD_HPP_

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "interbias/matrix.hpp"

namespace interbias {

class Tape {
 public:
  /// Registers a leaf value (parameter or input) and returns its node id.
  int input(Matrix value) { return push(Op::kInput, -1, -1, std::move(value)); }

  int matmul(int a, int b) {
    return push(Op::kMatmul, a, b, interbias::matmul(value(a), value(b)));
  }

  /// value(a) · value(b)ᵀ
  int matmul_nt(int a, int b) {
    return push(Op::kMatmulNT, a, b, interbias::matmul_nt(value(a), value(b)));
  }

  int add(int a, int b) {
    return push(Op::kAdd, a, b, interbias::add(value(a), value(b)));
  }

  /// Adds a 1×C bias row to every row of a.
  int add_row_broadcast(int a, int bias) {
    const Matrix& x = value(a);
    const Matrix& b = value(bias);
    if (b.rows() != 1 || b.cols() != x.cols())
      throw std::invalid_argument("add_row_broadcast: bias must be 1×cols");
    Matrix out = x;
    for (int r = 0; r < out.rows(); ++r) {
      double* row = out.row(r);
      const double* brow = b.row(0);
      for (int c = 0; c < out.cols(); ++c) row[c] += brow[c];
    }
    return push(Op::kAddRow, a, bias, std::move(out));
  }

  int scale(int a, double s) {
    Matrix out = value(a);
    for (double& v : out.data()) v *= s;
    int id = push(Op::kScale, a, -1, std::move(out));
    nodes_[id].scalar = s;
    return id;
  }

  int relu(int a) {
    Matrix out = value(a);
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return push(Op::kRelu, a, -1, std::move(out));
  }

  int row_softmax(int a) {
    Matrix out = value(a);
    for (int r = 0; r < out.rows(); ++r) {
      double* row = out.row(r);
      double m = row[0];
      for (int c = 1; c < out.cols(); ++c) m = std::max(m, row[c]);
      double sum = 0.0;
      for (int c = 0; c < out.cols(); ++c) {
        row[c] = std::exp(row[c] - m);
        sum += row[c];
      }
      for (int c = 0; c < out.cols(); ++c) row[c] /= sum;
    }
    return push(Op::kSoftmax, a, -1, std::move(out));
  }

  /// Per-row layer norm with learnable gain/bias (1×C each).
  int layer_norm(int a, int gamma, int beta, double eps = 1e-5) {
    const Matrix& x = value(a);
    const Matrix& g = value(gamma);
    const Matrix& b = value(beta);
    if (g.rows() != 1 || g.cols() != x.cols() || b.rows() != 1 || b.cols() != x.cols())
      throw std::invalid_argument("layer_norm: gain/bias must be 1×cols");
    Matrix out(x.rows(), x.cols());
    Matrix aux(x.rows(), 2);  // per-row mean, inv-std
    int C = x.cols();
    for (int r = 0; r < x.rows(); ++r) {
      const double* xr = x.row(r);
      double mean = 0.0;
      for (int c = 0; c < C; ++c) mean += xr[c];
      mean /= C;
      double var = 0.0;
      for (int c = 0; c < C; ++c) var += (xr[c] - mean) * (xr[c] - mean);
      var /= C;
      double inv = 1.0 / std::sqrt(var + eps);
      aux(r, 0) = mean;
      aux(r, 1) = inv;
      double* orow = out.row(r);
      for (int c = 0; c < C; ++c)
        orow[c] = (xr[c] - mean) * inv * g(0, c) + b(0, c);
    }
    int id = push(Op::kLayerNorm, a, gamma, std::move(out));
    nodes_[id].c = beta;
    nodes_[id].aux = std::move(aux);
    return id;
  }

  const Matrix& value(int id) const { return nodes_.at(id).value; }

  /// Gradient accumulated at a node; zero matrix if nothing flowed there.
  const Matrix& grad(int id) {
    Node& n = nodes_.at(id);
    ensure_grad(n);
    return n.grad;
  }

  /// Accumulates an externally computed gradient at a node.
  void add_grad(int id, const Matrix& g) {
    Node& n = nodes_.at(id);
    if (!g.same_shape(n.value)) throw std::invalid_argument("add_grad: shape mismatch");
    ensure_grad(n);
    axpy(1.0, g, n.grad);
  }

  /// Reverse pass over the whole tape. Call after seeding with add_grad.
  void backward() {
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.grad.empty()) continue;
      const Matrix& gy = n.grad;
      switch (n.op) {
        case Op::kInput:
          break;
        case Op::kMatmul: {
          // y = a·b : da += gy·bᵀ ; db += aᵀ·gy
          accumulate(n.a, interbias::matmul_nt(gy, nodes_[n.b].value));
          accumulate(n.b, interbias::matmul_tn(nodes_[n.a].value, gy));
          break;
        }
        case Op::kMatmulNT: {
          // y = a·bᵀ : da += gy·b ; db += gyᵀ·a
          accumulate(n.a, interbias::matmul(gy, nodes_[n.b].value));
          accumulate(n.b, interbias::matmul_tn(gy, nodes_[n.a].value));
          break;
        }
        case Op::kAdd: {
          accumulate(n.a, gy);
          accumulate(n.b, gy);
          break;
        }
        case Op::kAddRow: {
          accumulate(n.a, gy);
          Matrix gb(1, gy.cols());
          for (int r = 0; r < gy.rows(); ++r)
            for (int c = 0; c < gy.cols(); ++c) gb(0, c) += gy(r, c);
          accumulate(n.b, gb);
          break;
        }
        case Op::kScale: {
          Matrix ga = gy;
          for (double& v : ga.data()) v *= n.scalar;
          accumulate(n.a, ga);
          break;
        }
        case Op::kRelu: {
          Matrix ga = gy;
          const Matrix& x = nodes_[n.a].value;
          for (size_t i = 0; i < ga.data().size(); ++i)
            if (x.data()[i] <= 0.0) ga.data()[i] = 0.0;
          accumulate(n.a, ga);
          break;
        }
        case Op::kSoftmax: {
          // dx_i = y_i (gy_i - Σ_j gy_j y_j), per row.
          const Matrix& y = n.value;
          Matrix ga(y.rows(), y.cols());
          for (int r = 0; r < y.rows(); ++r) {
            double dot = 0.0;
            for (int c = 0; c < y.cols(); ++c) dot += gy(r, c) * y(r, c);
            for (int c = 0; c < y.cols(); ++c)
              ga(r, c) = y(r, c) * (gy(r, c) - dot);
          }
          accumulate(n.a, ga);
          break;
        }
        case Op::kLayerNorm: {
          const Matrix& x = nodes_[n.a].value;
          const Matrix& g = nodes_[n.b].value;
          int C = x.cols();
          Matrix ga(x.rows(), C);
          Matrix gg(1, C), gb(1, C);
          for (int r = 0; r < x.rows(); ++r) {
            double mean = n.aux(r, 0), inv = n.aux(r, 1);
            const double* xr = x.row(r);
            double m1 = 0.0, m2 = 0.0;  // means of gy⊙γ and gy⊙γ⊙x̂
            for (int c = 0; c < C; ++c) {
              double xh = (xr[c] - mean) * inv;
              double gyg = gy(r, c) * g(0, c);
              m1 += gyg;
              m2 += gyg * xh;
              gg(0, c) += gy(r, c) * xh;
              gb(0, c) += gy(r, c);
            }
            m1 /= C;
            m2 /= C;
            for (int c = 0; c < C; ++c) {
              double xh = (xr[c] - mean) * inv;
              ga(r, c) = (gy(r, c) * g(0, c) - m1 - xh * m2) * inv;
            }
          }
          accumulate(n.a, ga);
          accumulate(n.b, gg);
          accumulate(n.c, gb);
          break;
        }
      }
    }
  }

  int num_nodes() const { return static_cast<int>(nodes_.size()); }

 private:
  enum class Op { kInput, kMatmul, kMatmulNT, kAdd, kAddRow, kScale, kRelu, kSoftmax, kLayerNorm };

  struct Node {
    Op op;
    int a, b, c = -1;
    double scalar = 0.0;
    Matrix value;
    Matrix grad;
    Matrix aux;
  };

  int push(Op op, int a, int b, Matrix value) {
    nodes_.push_back(Node{op, a, b, -1, 0.0, std::move(value), {}, {}});
    return static_cast<int>(nodes_.size()) - 1;
  }

  void ensure_grad(Node& n) {
    if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  }

  void accumulate(int id, const Matrix& g) {
    Node& n = nodes_[id];
    ensure_grad(n);
    axpy(1.0, g, n.grad);
  }

  std::vector<Node> nodes_;
};

}  // namespace interbias

#endif  // INTERBIAS_AUTOGRAD_HPP_
