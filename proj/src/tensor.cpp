#include "lsno/tensor.hpp"

#include <cmath>
#include <utility>

namespace lsno {

namespace {

bool binary_shapes_ok(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() || a.is_scalar() || b.is_scalar();
}

// Transposed copy of a row-major [rows x cols] buffer.
Eigen::ArrayXd transposed(const Eigen::ArrayXd& m, Index rows, Index cols) {
  Eigen::ArrayXd t(rows * cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) t[c * rows + r] = m[r * cols + c];
  return t;
}

}  // namespace

void Tape::backward(const Tensor& loss) {
  if (!loss.is_scalar()) throw ContractError("backward requires a scalar loss");
  // Intermediate grads are scratch: reset them so repeated backward calls
  // accumulate only into leaves.
  for (auto& s : steps_) s.out.zero_grad();
  loss.ensure_grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->fn();
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul: operands must be rank 2");
  const Index m = a.shape()[0], k = a.shape()[1];
  const Index k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) throw DimensionError("matmul: inner dimensions disagree");

  Eigen::ArrayXd bt = transposed(b.values(), k, n);  // [n x k]
  Eigen::ArrayXd out(m * n);
  const double* ap = a.values().data();
  const double* btp = bt.data();
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) out[i * n + j] = fixed_dot(ap + i * k, btp + j * k, k);

  const bool needs = a.needs_grad() || b.needs_grad();
  Tensor result = make_op_output({m, n}, std::move(out), needs);
  if (tape.recording() && needs) {
    tape.record(
        [a, b, result, m, k, n]() {
          if (!result.has_grad()) return;
          const Eigen::ArrayXd& g = result.grad();
          if (a.needs_grad()) {
            // da[i,l] = sum_j g[i,j] * b[l,j]
            Eigen::ArrayXd& da = a.ensure_grad();
            const double* bp = b.values().data();
            for (Index i = 0; i < m; ++i)
              for (Index l = 0; l < k; ++l)
                da[i * k + l] += fixed_dot(g.data() + i * n, bp + l * n, n);
          }
          if (b.needs_grad()) {
            // db[l,j] = sum_i a[i,l] * g[i,j]
            Eigen::ArrayXd at = transposed(a.values(), m, k);  // [k x m]
            Eigen::ArrayXd gt = transposed(g, m, n);           // [n x m]
            Eigen::ArrayXd& db = b.ensure_grad();
            for (Index l = 0; l < k; ++l)
              for (Index j = 0; j < n; ++j)
                db[l * n + j] += fixed_dot(at.data() + l * m, gt.data() + j * m, m);
          }
        },
        result);
  }
  return result;
}

Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& kernel, Index stride) {
  if (x.rank() != 2) throw DimensionError("conv1d: input must be [c_in, L]");
  if (kernel.rank() != 3) throw DimensionError("conv1d: kernel must be [c_out, c_in, w]");
  if (stride < 1) throw ParameterError("conv1d: stride must be positive");
  const Index c_in = x.shape()[0], L = x.shape()[1];
  const Index c_out = kernel.shape()[0], kc = kernel.shape()[1], w = kernel.shape()[2];
  if (kc != c_in) throw DimensionError("conv1d: kernel channel count disagrees with input");
  if (w > L) throw DimensionError("conv1d: kernel wider than input");
  const Index lp = (L - w) / stride + 1;
  const Index q = c_in * w;

  // Row-major patch matrix: patches[j, c*w + t] = x[c, j*stride + t].
  Eigen::ArrayXd patches(lp * q);
  {
    const double* xp = x.values().data();
    for (Index j = 0; j < lp; ++j)
      for (Index c = 0; c < c_in; ++c)
        for (Index t = 0; t < w; ++t) patches[j * q + c * w + t] = xp[c * L + j * stride + t];
  }

  Eigen::ArrayXd out(c_out * lp);
  const double* kp = kernel.values().data();
  for (Index o = 0; o < c_out; ++o)
    for (Index j = 0; j < lp; ++j) out[o * lp + j] = fixed_dot(kp + o * q, patches.data() + j * q, q);

  const bool needs = x.needs_grad() || kernel.needs_grad();
  Tensor result = make_op_output({c_out, lp}, std::move(out), needs);
  if (tape.recording() && needs) {
    tape.record(
        [x, kernel, result, patches = std::move(patches), stride, c_in, L, c_out, w, lp, q]() {
          if (!result.has_grad()) return;
          const Eigen::ArrayXd& g = result.grad();
          if (kernel.needs_grad()) {
            // dk[o, q'] = sum_j g[o, j] * patches[j, q']
            Eigen::ArrayXd pt = transposed(patches, lp, q);  // [q x lp]
            Eigen::ArrayXd& dk = kernel.ensure_grad();
            for (Index o = 0; o < c_out; ++o)
              for (Index r = 0; r < q; ++r)
                dk[o * q + r] += fixed_dot(g.data() + o * lp, pt.data() + r * lp, lp);
          }
          if (x.needs_grad()) {
            // dpatches[j, q'] = sum_o kernel[o, q'] * g[o, j], scattered back.
            Eigen::ArrayXd kt = transposed(kernel.values(), c_out, q);  // [q x c_out]
            Eigen::ArrayXd gt = transposed(g, c_out, lp);               // [lp x c_out]
            Eigen::ArrayXd& dx = x.ensure_grad();
            for (Index j = 0; j < lp; ++j)
              for (Index c = 0; c < c_in; ++c)
                for (Index t = 0; t < w; ++t)
                  dx[c * L + j * stride + t] +=
                      fixed_dot(kt.data() + (c * w + t) * c_out, gt.data() + j * c_out, c_out);
          }
        },
        result);
  }
  return result;
}

namespace {

enum class BinKind { add, sub, mul, divide };

Tensor binary_op(Tape& tape, const Tensor& a, const Tensor& b, BinKind kind, const char* name) {
  if (!binary_shapes_ok(a, b))
    throw DimensionError(std::string(name) + ": shapes must match or one operand be scalar");
  const bool a_scalar = a.is_scalar() && !b.is_scalar();
  const bool b_scalar = b.is_scalar() && !a.is_scalar();
  const Shape& out_shape = a_scalar ? b.shape() : a.shape();

  Eigen::ArrayXd out;
  const Eigen::ArrayXd& av = a.values();
  const Eigen::ArrayXd& bv = b.values();
  switch (kind) {
    case BinKind::add:
      out = a_scalar ? (av[0] + bv).eval() : b_scalar ? (av + bv[0]).eval() : (av + bv).eval();
      break;
    case BinKind::sub:
      out = a_scalar ? (av[0] - bv).eval() : b_scalar ? (av - bv[0]).eval() : (av - bv).eval();
      break;
    case BinKind::mul:
      out = a_scalar ? (av[0] * bv).eval() : b_scalar ? (av * bv[0]).eval() : (av * bv).eval();
      break;
    case BinKind::divide:
      out = a_scalar ? (av[0] / bv).eval() : b_scalar ? (av / bv[0]).eval() : (av / bv).eval();
      break;
  }

  const bool needs = a.needs_grad() || b.needs_grad();
  Tensor result = make_op_output(out_shape, std::move(out), needs);
  if (tape.recording() && needs) {
    tape.record(
        [a, b, result, kind, a_scalar, b_scalar]() {
          if (!result.has_grad()) return;
          const Eigen::ArrayXd& g = result.grad();
          const Eigen::ArrayXd& av = a.values();
          const Eigen::ArrayXd& bv = b.values();
          switch (kind) {
            case BinKind::add:
              if (a.needs_grad()) {
                if (a_scalar) a.ensure_grad()[0] += g.sum();
                else a.ensure_grad() += g;
              }
              if (b.needs_grad()) {
                if (b_scalar) b.ensure_grad()[0] += g.sum();
                else b.ensure_grad() += g;
              }
              break;
            case BinKind::sub:
              if (a.needs_grad()) {
                if (a_scalar) a.ensure_grad()[0] += g.sum();
                else a.ensure_grad() += g;
              }
              if (b.needs_grad()) {
                if (b_scalar) b.ensure_grad()[0] -= g.sum();
                else b.ensure_grad() -= g;
              }
              break;
            case BinKind::mul:
              if (a.needs_grad()) {
                if (a_scalar) a.ensure_grad()[0] += (g * bv).sum();
                else if (b_scalar) a.ensure_grad() += g * bv[0];
                else a.ensure_grad() += g * bv;
              }
              if (b.needs_grad()) {
                if (b_scalar) b.ensure_grad()[0] += (g * av).sum();
                else if (a_scalar) b.ensure_grad() += g * av[0];
                else b.ensure_grad() += g * av;
              }
              break;
            case BinKind::divide:
              if (a.needs_grad()) {
                if (a_scalar) a.ensure_grad()[0] += (g / bv).sum();
                else if (b_scalar) a.ensure_grad() += g / bv[0];
                else a.ensure_grad() += g / bv;
              }
              if (b.needs_grad()) {
                if (b_scalar) b.ensure_grad()[0] += -(g * av / (bv[0] * bv[0])).sum();
                else if (a_scalar) b.ensure_grad() += -g * av[0] / bv.square();
                else b.ensure_grad() += -g * av / bv.square();
              }
              break;
          }
        },
        result);
  }
  return result;
}

template <typename Fwd, typename Dfn>
Tensor unary_op(Tape& tape, const Tensor& x, Fwd fwd, Dfn dfn) {
  Eigen::ArrayXd out = fwd(x.values());
  const bool needs = x.needs_grad();
  Tensor result = make_op_output(x.shape(), std::move(out), needs);
  if (tape.recording() && needs) {
    tape.record(
        [x, result, dfn]() {
          if (!result.has_grad()) return;
          x.ensure_grad() += result.grad() * dfn(x.values(), result.values());
        },
        result);
  }
  return result;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, a, b, BinKind::add, "add"); }
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, a, b, BinKind::sub, "sub"); }
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, a, b, BinKind::mul, "mul"); }
Tensor div(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, a, b, BinKind::divide, "div"); }

Tensor tanh(Tape& tape, const Tensor& x) {
  return unary_op(
      tape, x, [](const Eigen::ArrayXd& v) { return v.tanh().eval(); },
      [](const Eigen::ArrayXd&, const Eigen::ArrayXd& y) { return (1.0 - y.square()).eval(); });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  auto fwd = [](const Eigen::ArrayXd& v) {
    Eigen::ArrayXd y(v.size());
    for (Index i = 0; i < v.size(); ++i) {
      const double t = v[i];
      y[i] = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
    }
    return y;
  };
  return unary_op(tape, x, fwd, [](const Eigen::ArrayXd&, const Eigen::ArrayXd& y) {
    return (y * (1.0 - y)).eval();
  });
}

Tensor relu(Tape& tape, const Tensor& x) {
  return unary_op(
      tape, x, [](const Eigen::ArrayXd& v) { return v.max(0.0).eval(); },
      [](const Eigen::ArrayXd& v, const Eigen::ArrayXd&) {
        return (v > 0.0).cast<double>().eval();
      });
}

Tensor softplus(Tape& tape, const Tensor& x) {
  auto fwd = [](const Eigen::ArrayXd& v) {
    Eigen::ArrayXd y(v.size());
    for (Index i = 0; i < v.size(); ++i) {
      const double t = v[i];
      y[i] = t > 30.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
    }
    return y;
  };
  auto dfn = [](const Eigen::ArrayXd& v, const Eigen::ArrayXd&) {
    Eigen::ArrayXd d(v.size());
    for (Index i = 0; i < v.size(); ++i) {
      const double t = v[i];
      d[i] = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
    }
    return d;
  };
  return unary_op(tape, x, fwd, dfn);
}

Tensor abs(Tape& tape, const Tensor& x) {
  return unary_op(
      tape, x, [](const Eigen::ArrayXd& v) { return v.abs().eval(); },
      [](const Eigen::ArrayXd& v, const Eigen::ArrayXd&) { return v.sign().eval(); });
}

Tensor pow_p(Tape& tape, const Tensor& x, double p) {
  if (p < 1.0) throw ParameterError("pow_p: exponent must be >= 1");
  if ((x.values() < 0.0).any()) throw DomainError("pow_p: negative base");
  return unary_op(
      tape, x, [p](const Eigen::ArrayXd& v) { return v.pow(p).eval(); },
      [p](const Eigen::ArrayXd& v, const Eigen::ArrayXd&) { return (p * v.pow(p - 1.0)).eval(); });
}

Tensor clamp_min(Tape& tape, const Tensor& x, double floor) {
  return unary_op(
      tape, x, [floor](const Eigen::ArrayXd& v) { return v.max(floor).eval(); },
      [floor](const Eigen::ArrayXd& v, const Eigen::ArrayXd&) {
        return (v > floor).cast<double>().eval();
      });
}

Tensor sum(Tape& tape, const Tensor& x) {
  Tensor result = make_op_output({1}, Eigen::ArrayXd::Constant(1, x.values().sum()), x.needs_grad());
  if (tape.recording() && x.needs_grad()) {
    tape.record(
        [x, result]() {
          if (!result.has_grad()) return;
          x.ensure_grad() += result.grad()[0];
        },
        result);
  }
  return result;
}

Tensor mean(Tape& tape, const Tensor& x) {
  const double n = static_cast<double>(x.size());
  Tensor result =
      make_op_output({1}, Eigen::ArrayXd::Constant(1, x.values().sum() / n), x.needs_grad());
  if (tape.recording() && x.needs_grad()) {
    tape.record(
        [x, result, n]() {
          if (!result.has_grad()) return;
          x.ensure_grad() += result.grad()[0] / n;
        },
        result);
  }
  return result;
}

namespace {

Tensor axis_reduce(Tape& tape, const Tensor& x, Index axis, bool take_mean, const char* name) {
  if (axis < 0 || axis >= x.rank())
    throw DimensionError(std::string(name) + ": axis out of range");
  const Shape& s = x.shape();
  Index outer = 1, inner = 1;
  for (Index i = 0; i < axis; ++i) outer *= s[i];
  for (Index i = axis + 1; i < x.rank(); ++i) inner *= s[i];
  const Index extent = s[axis];

  Shape out_shape;
  for (Index i = 0; i < x.rank(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  if (out_shape.empty()) out_shape.push_back(1);

  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(outer * inner);
  const double* xp = x.values().data();
  for (Index o = 0; o < outer; ++o)
    for (Index e = 0; e < extent; ++e)
      for (Index i = 0; i < inner; ++i) out[o * inner + i] += xp[(o * extent + e) * inner + i];
  if (take_mean) out /= static_cast<double>(extent);

  const bool needs = x.needs_grad();
  Tensor result = make_op_output(std::move(out_shape), std::move(out), needs);
  if (tape.recording() && needs) {
    tape.record(
        [x, result, outer, inner, extent, take_mean]() {
          if (!result.has_grad()) return;
          const Eigen::ArrayXd& g = result.grad();
          Eigen::ArrayXd& dx = x.ensure_grad();
          const double scale = take_mean ? 1.0 / static_cast<double>(extent) : 1.0;
          for (Index o = 0; o < outer; ++o)
            for (Index e = 0; e < extent; ++e)
              for (Index i = 0; i < inner; ++i)
                dx[(o * extent + e) * inner + i] += g[o * inner + i] * scale;
        },
        result);
  }
  return result;
}

}  // namespace

Tensor sum(Tape& tape, const Tensor& x, Index axis) { return axis_reduce(tape, x, axis, false, "sum"); }
Tensor mean(Tape& tape, const Tensor& x, Index axis) { return axis_reduce(tape, x, axis, true, "mean"); }

Tensor concat(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ParameterError("concat: no parts");
  const Tensor& first = parts.front();
  Index dim0 = 0;
  bool needs = false;
  for (const Tensor& p : parts) {
    if (p.rank() != first.rank() || p.rank() < 1)
      throw DimensionError("concat: ranks disagree");
    for (Index i = 1; i < p.rank(); ++i)
      if (p.shape()[i] != first.shape()[i]) throw DimensionError("concat: trailing extents disagree");
    dim0 += p.shape()[0];
    needs = needs || p.needs_grad();
  }
  Shape out_shape = first.shape();
  out_shape[0] = dim0;

  Eigen::ArrayXd out(shape_size(out_shape));
  Index offset = 0;
  for (const Tensor& p : parts) {
    out.segment(offset, p.size()) = p.values();
    offset += p.size();
  }

  Tensor result = make_op_output(std::move(out_shape), std::move(out), needs);
  if (tape.recording() && needs) {
    tape.record(
        [parts, result]() {
          if (!result.has_grad()) return;
          const Eigen::ArrayXd& g = result.grad();
          Index offset = 0;
          for (const Tensor& p : parts) {
            if (p.needs_grad()) p.ensure_grad() += g.segment(offset, p.size());
            offset += p.size();
          }
        },
        result);
  }
  return result;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) throw DimensionError("reshape: element count changes");
  const bool needs = x.needs_grad();
  Tensor result = make_op_output(std::move(shape), x.values(), needs);
  if (tape.recording() && needs) {
    tape.record(
        [x, result]() {
          if (!result.has_grad()) return;
          x.ensure_grad() += result.grad();
        },
        result);
  }
  return result;
}

}  // namespace lsno
