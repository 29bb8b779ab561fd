#include "poseforge/tape.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace poseforge {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("tape: " + msg); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) fail(std::string(op) + " shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

struct AxisSplit {
    std::int64_t outer, span, inner;
};

AxisSplit axis_split(const std::vector<int>& shape, int axis) {
    if (axis < 0 || axis >= static_cast<int>(shape.size())) fail("axis out of range for shape " + shape_str(shape));
    AxisSplit s{1, shape[static_cast<std::size_t>(axis)], 1};
    for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
    for (int i = axis + 1; i < static_cast<int>(shape.size()); ++i) s.inner *= shape[static_cast<std::size_t>(i)];
    return s;
}

struct ConvDims {
    int B, Ci, H, W, Co, k, stride;
    int Ho, Wo, pad_top, pad_left;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride) {
    if (x.rank() != 4) fail("conv2d input must be rank 4, got " + shape_str(x.shape()));
    if (w.rank() != 4) fail("conv2d kernel must be rank 4, got " + shape_str(w.shape()));
    ConvDims d;
    d.B = x.dim(0);
    d.Ci = x.dim(1);
    d.H = x.dim(2);
    d.W = x.dim(3);
    d.Co = w.dim(0);
    d.k = w.dim(2);
    d.stride = stride;
    if (w.dim(1) != d.Ci) fail("conv2d channel mismatch");
    if (w.dim(3) != d.k || (d.k != 3 && d.k != 5)) fail("conv2d supports 3x3 and 5x5 kernels only");
    if (stride != 1 && stride != 2) fail("conv2d supports stride 1 or 2 only");
    d.Ho = (d.H + stride - 1) / stride;
    d.Wo = (d.W + stride - 1) / stride;
    int pad_h = std::max((d.Ho - 1) * stride + d.k - d.H, 0);
    int pad_w = std::max((d.Wo - 1) * stride + d.k - d.W, 0);
    d.pad_top = pad_h / 2;
    d.pad_left = pad_w / 2;
    return d;
}

// col is [Ci*k*k, Ho*Wo] for one batch element.
void im2col(const double* x, const ConvDims& d, std::vector<double>& col) {
    const int kk = d.k * d.k;
    col.assign(static_cast<std::size_t>(d.Ci) * kk * d.Ho * d.Wo, 0.0);
    for (int ci = 0; ci < d.Ci; ++ci) {
        const double* xc = x + static_cast<std::size_t>(ci) * d.H * d.W;
        for (int kh = 0; kh < d.k; ++kh) {
            for (int kw = 0; kw < d.k; ++kw) {
                double* crow = col.data() + (static_cast<std::size_t>(ci) * kk + kh * d.k + kw) * d.Ho * d.Wo;
                for (int oh = 0; oh < d.Ho; ++oh) {
                    int ih = oh * d.stride - d.pad_top + kh;
                    if (ih < 0 || ih >= d.H) continue;
                    for (int ow = 0; ow < d.Wo; ++ow) {
                        int iw = ow * d.stride - d.pad_left + kw;
                        if (iw < 0 || iw >= d.W) continue;
                        crow[oh * d.Wo + ow] = xc[ih * d.W + iw];
                    }
                }
            }
        }
    }
}

void col2im_add(const std::vector<double>& col, const ConvDims& d, double* x) {
    const int kk = d.k * d.k;
    for (int ci = 0; ci < d.Ci; ++ci) {
        double* xc = x + static_cast<std::size_t>(ci) * d.H * d.W;
        for (int kh = 0; kh < d.k; ++kh) {
            for (int kw = 0; kw < d.k; ++kw) {
                const double* crow = col.data() + (static_cast<std::size_t>(ci) * kk + kh * d.k + kw) * d.Ho * d.Wo;
                for (int oh = 0; oh < d.Ho; ++oh) {
                    int ih = oh * d.stride - d.pad_top + kh;
                    if (ih < 0 || ih >= d.H) continue;
                    for (int ow = 0; ow < d.Wo; ++ow) {
                        int iw = ow * d.stride - d.pad_left + kw;
                        if (iw < 0 || iw >= d.W) continue;
                        xc[ih * d.W + iw] += crow[oh * d.Wo + ow];
                    }
                }
            }
        }
    }
}

}  // namespace

int Tape::leaf(Tensor value) {
    Node n;
    n.op = Op::Leaf;
    n.val = std::move(value);
    require_finite(n.val, "leaf");
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::emit(Node n) {
    eval(n);
    require_finite(n.val, "op result");
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::add(int a, int b) {
    require_same_shape(val(a), val(b), "add");
    Node n;
    n.op = Op::Add;
    n.in0 = a;
    n.in1 = b;
    return emit(std::move(n));
}

int Tape::sub(int a, int b) { return add(a, scale(b, -1.0)); }

int Tape::mul(int a, int b) {
    require_same_shape(val(a), val(b), "mul");
    Node n;
    n.op = Op::Mul;
    n.in0 = a;
    n.in1 = b;
    return emit(std::move(n));
}

int Tape::scale(int a, double c) {
    Node n;
    n.op = Op::Scale;
    n.in0 = a;
    n.c0 = c;
    return emit(std::move(n));
}

int Tape::shift(int a, double c) {
    Node n;
    n.op = Op::Shift;
    n.in0 = a;
    n.c0 = c;
    return emit(std::move(n));
}

int Tape::matmul(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows())
        fail("matmul shape mismatch " + shape_str(ta.shape()) + " vs " + shape_str(tb.shape()));
    Node n;
    n.op = Op::Matmul;
    n.in0 = a;
    n.in1 = b;
    return emit(std::move(n));
}

int Tape::transpose(int a) {
    if (val(a).rank() != 2) fail("transpose needs rank 2");
    Node n;
    n.op = Op::Transpose;
    n.in0 = a;
    return emit(std::move(n));
}

int Tape::add_rowvec(int m, int v) {
    if (val(m).rank() != 2 || val(v).rank() != 1 || val(m).cols() != val(v).dim(0)) fail("add_rowvec shape mismatch");
    Node n;
    n.op = Op::AddRowVec;
    n.in0 = m;
    n.in1 = v;
    return emit(std::move(n));
}

int Tape::add_colvec(int m, int v) {
    if (val(m).rank() != 2 || val(v).rank() != 1 || val(m).rows() != val(v).dim(0)) fail("add_colvec shape mismatch");
    Node n;
    n.op = Op::AddColVec;
    n.in0 = m;
    n.in1 = v;
    return emit(std::move(n));
}

int Tape::rowsum(int m) {
    if (val(m).rank() != 2) fail("rowsum needs rank 2");
    Node n;
    n.op = Op::RowSum;
    n.in0 = m;
    return emit(std::move(n));
}

int Tape::colsum(int m) {
    if (val(m).rank() != 2) fail("colsum needs rank 2");
    Node n;
    n.op = Op::ColSum;
    n.in0 = m;
    return emit(std::move(n));
}

int Tape::concat(int a, int b, int axis) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.rank() != tb.rank()) fail("concat rank mismatch");
    for (int i = 0; i < ta.rank(); ++i)
        if (i != axis && ta.dim(i) != tb.dim(i)) fail("concat shape mismatch on axis " + std::to_string(i));
    Node n;
    n.op = Op::Concat;
    n.in0 = a;
    n.in1 = b;
    n.i0 = axis;
    return emit(std::move(n));
}

int Tape::slice(int a, int axis, int start, int len) {
    const Tensor& ta = val(a);
    if (axis < 0 || axis >= ta.rank() || start < 0 || len < 1 || start + len > ta.dim(axis))
        fail("slice out of range on " + shape_str(ta.shape()));
    Node n;
    n.op = Op::Slice;
    n.in0 = a;
    n.i0 = axis;
    n.i1 = start;
    n.i2 = len;
    return emit(std::move(n));
}

int Tape::leaky_relu(int a, double slope) {
    Node n;
    n.op = Op::LeakyRelu;
    n.in0 = a;
    n.c0 = slope;
    return emit(std::move(n));
}

int Tape::tanh(int a) {
    Node n;
    n.op = Op::Tanh;
    n.in0 = a;
    return emit(std::move(n));
}

int Tape::sigmoid(int a) {
    Node n;
    n.op = Op::Sigmoid;
    n.in0 = a;
    return emit(std::move(n));
}

int Tape::square(int a) {
    Node n;
    n.op = Op::Square;
    n.in0 = a;
    return emit(std::move(n));
}

int Tape::sqrt(int a) {
    Node n;
    n.op = Op::Sqrt;
    n.in0 = a;
    return emit(std::move(n));
}

int Tape::recip(int a) {
    Node n;
    n.op = Op::Recip;
    n.in0 = a;
    return emit(std::move(n));
}

int Tape::log(int a) {
    Node n;
    n.op = Op::Log;
    n.in0 = a;
    return emit(std::move(n));
}

int Tape::exp(int a) {
    Node n;
    n.op = Op::Exp;
    n.in0 = a;
    return emit(std::move(n));
}

int Tape::abs(int a) {
    Node n;
    n.op = Op::Abs;
    n.in0 = a;
    return emit(std::move(n));
}

int Tape::clamp(int a, double lo, double hi) {
    Node n;
    n.op = Op::Clamp;
    n.in0 = a;
    n.c0 = lo;
    n.c1 = hi;
    return emit(std::move(n));
}

int Tape::sum(int a) {
    Node n;
    n.op = Op::Sum;
    n.in0 = a;
    return emit(std::move(n));
}

int Tape::mean(int a) {
    Node n;
    n.op = Op::Mean;
    n.in0 = a;
    return emit(std::move(n));
}

int Tape::l2norm(int a) { return sqrt(sum(square(a))); }

int Tape::conv2d(int x, int w, int stride) {
    conv_dims(val(x), val(w), stride);  // validates
    Node n;
    n.op = Op::Conv2d;
    n.in0 = x;
    n.in1 = w;
    n.i0 = stride;
    return emit(std::move(n));
}

int Tape::chan_bias(int x, int b) {
    if (val(x).rank() != 4 || val(b).rank() != 1 || val(b).dim(0) != val(x).dim(1)) fail("chan_bias shape mismatch");
    Node n;
    n.op = Op::ChanBias;
    n.in0 = x;
    n.in1 = b;
    return emit(std::move(n));
}

int Tape::upsample_nn2(int x) {
    if (val(x).rank() != 4) fail("upsample_nn2 needs rank 4");
    Node n;
    n.op = Op::UpsampleNN;
    n.in0 = x;
    return emit(std::move(n));
}

void Tape::eval(Node& n) const {
    auto& in0 = nodes_[static_cast<std::size_t>(n.in0 >= 0 ? n.in0 : 0)].val;
    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Add: {
            const Tensor& b = val(n.in1);
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] += b[i];
            break;
        }
        case Op::Mul: {
            const Tensor& b = val(n.in1);
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] *= b[i];
            break;
        }
        case Op::Scale: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] *= n.c0;
            break;
        }
        case Op::Shift: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] += n.c0;
            break;
        }
        case Op::Matmul: {
            const Tensor& b = val(n.in1);
            n.val = Tensor({in0.rows(), b.cols()});
            ConstMatMap ma(in0.data(), in0.rows(), in0.cols());
            ConstMatMap mb(b.data(), b.rows(), b.cols());
            MatMap mc(n.val.data(), in0.rows(), b.cols());
            mc.noalias() = ma * mb;
            break;
        }
        case Op::Transpose: {
            n.val = Tensor({in0.cols(), in0.rows()});
            for (int r = 0; r < in0.rows(); ++r)
                for (int c = 0; c < in0.cols(); ++c) n.val.at(c, r) = in0.at(r, c);
            break;
        }
        case Op::AddRowVec: {
            const Tensor& v = val(n.in1);
            n.val = in0;
            for (int r = 0; r < in0.rows(); ++r)
                for (int c = 0; c < in0.cols(); ++c) n.val.at(r, c) += v[c];
            break;
        }
        case Op::AddColVec: {
            const Tensor& v = val(n.in1);
            n.val = in0;
            for (int r = 0; r < in0.rows(); ++r)
                for (int c = 0; c < in0.cols(); ++c) n.val.at(r, c) += v[r];
            break;
        }
        case Op::RowSum: {
            n.val = Tensor({in0.rows()});
            for (int r = 0; r < in0.rows(); ++r) {
                double s = 0;
                for (int c = 0; c < in0.cols(); ++c) s += in0.at(r, c);
                n.val[r] = s;
            }
            break;
        }
        case Op::ColSum: {
            n.val = Tensor({in0.cols()});
            for (int r = 0; r < in0.rows(); ++r)
                for (int c = 0; c < in0.cols(); ++c) n.val[c] += in0.at(r, c);
            break;
        }
        case Op::Concat: {
            const Tensor& b = val(n.in1);
            std::vector<int> shape = in0.shape();
            shape[static_cast<std::size_t>(n.i0)] += b.dim(n.i0);
            n.val = Tensor(shape);
            AxisSplit sa = axis_split(in0.shape(), n.i0);
            AxisSplit sb = axis_split(b.shape(), n.i0);
            std::int64_t out_span = sa.span + sb.span;
            for (std::int64_t o = 0; o < sa.outer; ++o) {
                for (std::int64_t j = 0; j < sa.span * sa.inner; ++j)
                    n.val[o * out_span * sa.inner + j] = in0[o * sa.span * sa.inner + j];
                for (std::int64_t j = 0; j < sb.span * sb.inner; ++j)
                    n.val[o * out_span * sa.inner + sa.span * sa.inner + j] = b[o * sb.span * sb.inner + j];
            }
            break;
        }
        case Op::Slice: {
            std::vector<int> shape = in0.shape();
            shape[static_cast<std::size_t>(n.i0)] = n.i2;
            n.val = Tensor(shape);
            AxisSplit s = axis_split(in0.shape(), n.i0);
            for (std::int64_t o = 0; o < s.outer; ++o)
                for (std::int64_t j = 0; j < static_cast<std::int64_t>(n.i2) * s.inner; ++j)
                    n.val[o * n.i2 * s.inner + j] = in0[o * s.span * s.inner + n.i1 * s.inner + j];
            break;
        }
        case Op::PadSlice: {
            n.val = Tensor(n.shape_attr);
            AxisSplit s = axis_split(n.shape_attr, n.i0);
            std::int64_t len = in0.dim(n.i0);
            for (std::int64_t o = 0; o < s.outer; ++o)
                for (std::int64_t j = 0; j < len * s.inner; ++j)
                    n.val[o * s.span * s.inner + n.i1 * s.inner + j] = in0[o * len * s.inner + j];
            break;
        }
        case Op::LeakyRelu: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i)
                if (n.val[i] < 0) n.val[i] *= n.c0;
            break;
        }
        case Op::LeakyReluMask: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] = in0[i] >= 0 ? 1.0 : n.c0;
            break;
        }
        case Op::Tanh: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] = std::tanh(in0[i]);
            break;
        }
        case Op::Sigmoid: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] = 1.0 / (1.0 + std::exp(-in0[i]));
            break;
        }
        case Op::Square: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] = in0[i] * in0[i];
            break;
        }
        case Op::Sqrt: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] = std::sqrt(in0[i]);
            break;
        }
        case Op::Recip: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] = 1.0 / in0[i];
            break;
        }
        case Op::Log: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] = std::log(in0[i]);
            break;
        }
        case Op::Exp: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] = std::exp(in0[i]);
            break;
        }
        case Op::Abs: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] = std::abs(in0[i]);
            break;
        }
        case Op::SignMask: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] = in0[i] >= 0 ? 1.0 : -1.0;
            break;
        }
        case Op::Clamp: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i) n.val[i] = std::min(std::max(in0[i], n.c0), n.c1);
            break;
        }
        case Op::ClampMask: {
            n.val = in0;
            for (std::int64_t i = 0; i < n.val.size(); ++i)
                n.val[i] = (in0[i] > n.c0 && in0[i] < n.c1) ? 1.0 : 0.0;
            break;
        }
        case Op::Sum: {
            double s = 0;
            for (std::int64_t i = 0; i < in0.size(); ++i) s += in0[i];
            n.val = Tensor::scalar(s);
            break;
        }
        case Op::Mean: {
            double s = 0;
            for (std::int64_t i = 0; i < in0.size(); ++i) s += in0[i];
            n.val = Tensor::scalar(s / static_cast<double>(in0.size()));
            break;
        }
        case Op::BroadcastFull: {
            n.val = Tensor::full(n.shape_attr, in0[0]);
            break;
        }
        case Op::BroadcastCols: {
            n.val = Tensor(n.shape_attr);
            for (int r = 0; r < n.val.rows(); ++r)
                for (int c = 0; c < n.val.cols(); ++c) n.val.at(r, c) = in0[r];
            break;
        }
        case Op::BroadcastRows: {
            n.val = Tensor(n.shape_attr);
            for (int r = 0; r < n.val.rows(); ++r)
                for (int c = 0; c < n.val.cols(); ++c) n.val.at(r, c) = in0[c];
            break;
        }
        case Op::Conv2d: {
            const Tensor& w = val(n.in1);
            ConvDims d = conv_dims(in0, w, n.i0);
            n.val = Tensor({d.B, d.Co, d.Ho, d.Wo});
            std::vector<double> col;
            const int kk = d.Ci * d.k * d.k;
            ConstMatMap wm(w.data(), d.Co, kk);
            for (int b = 0; b < d.B; ++b) {
                im2col(in0.data() + static_cast<std::size_t>(b) * d.Ci * d.H * d.W, d, col);
                ConstMatMap cm(col.data(), kk, d.Ho * d.Wo);
                MatMap om(n.val.data() + static_cast<std::size_t>(b) * d.Co * d.Ho * d.Wo, d.Co, d.Ho * d.Wo);
                om.noalias() = wm * cm;
            }
            break;
        }
        case Op::Conv2dInputGrad: {
            // in0 = output grad, in1 = kernel; shape_attr = input shape
            const Tensor& w = val(n.in1);
            Tensor xshape(n.shape_attr);
            ConvDims d = conv_dims(xshape, w, n.i0);
            n.val = Tensor(n.shape_attr);
            const int kk = d.Ci * d.k * d.k;
            std::vector<double> col(static_cast<std::size_t>(kk) * d.Ho * d.Wo);
            ConstMatMap wm(w.data(), d.Co, kk);
            for (int b = 0; b < d.B; ++b) {
                ConstMatMap gm(in0.data() + static_cast<std::size_t>(b) * d.Co * d.Ho * d.Wo, d.Co, d.Ho * d.Wo);
                MatMap cm(col.data(), kk, d.Ho * d.Wo);
                cm.noalias() = wm.transpose() * gm;
                col2im_add(col, d, n.val.data() + static_cast<std::size_t>(b) * d.Ci * d.H * d.W);
            }
            break;
        }
        case Op::Conv2dWeightGrad: {
            // in0 = input x, in1 = output grad; shape_attr = kernel shape
            const Tensor& g = val(n.in1);
            Tensor wshape(n.shape_attr);
            ConvDims d = conv_dims(in0, wshape, n.i0);
            n.val = Tensor(n.shape_attr);
            const int kk = d.Ci * d.k * d.k;
            std::vector<double> col;
            MatMap dwm(n.val.data(), d.Co, kk);
            for (int b = 0; b < d.B; ++b) {
                im2col(in0.data() + static_cast<std::size_t>(b) * d.Ci * d.H * d.W, d, col);
                ConstMatMap cm(col.data(), kk, d.Ho * d.Wo);
                ConstMatMap gm(g.data() + static_cast<std::size_t>(b) * d.Co * d.Ho * d.Wo, d.Co, d.Ho * d.Wo);
                dwm.noalias() += gm * cm.transpose();
            }
            break;
        }
        case Op::ChanBias: {
            const Tensor& b = val(n.in1);
            n.val = in0;
            int C = in0.dim(1);
            std::int64_t hw = static_cast<std::int64_t>(in0.dim(2)) * in0.dim(3);
            for (int bi = 0; bi < in0.dim(0); ++bi)
                for (int c = 0; c < C; ++c) {
                    double* p = n.val.data() + (static_cast<std::int64_t>(bi) * C + c) * hw;
                    for (std::int64_t i = 0; i < hw; ++i) p[i] += b[c];
                }
            break;
        }
        case Op::ChanSum: {
            int C = in0.dim(1);
            std::int64_t hw = static_cast<std::int64_t>(in0.dim(2)) * in0.dim(3);
            n.val = Tensor({C});
            for (int bi = 0; bi < in0.dim(0); ++bi)
                for (int c = 0; c < C; ++c) {
                    const double* p = in0.data() + (static_cast<std::int64_t>(bi) * C + c) * hw;
                    double s = 0;
                    for (std::int64_t i = 0; i < hw; ++i) s += p[i];
                    n.val[c] += s;
                }
            break;
        }
        case Op::ChanBroadcast: {
            n.val = Tensor(n.shape_attr);
            int C = n.val.dim(1);
            std::int64_t hw = static_cast<std::int64_t>(n.val.dim(2)) * n.val.dim(3);
            for (int bi = 0; bi < n.val.dim(0); ++bi)
                for (int c = 0; c < C; ++c) {
                    double* p = n.val.data() + (static_cast<std::int64_t>(bi) * C + c) * hw;
                    for (std::int64_t i = 0; i < hw; ++i) p[i] = in0[c];
                }
            break;
        }
        case Op::UpsampleNN: {
            int B = in0.dim(0), C = in0.dim(1), H = in0.dim(2), W = in0.dim(3);
            n.val = Tensor({B, C, 2 * H, 2 * W});
            for (int bc = 0; bc < B * C; ++bc) {
                const double* src = in0.data() + static_cast<std::int64_t>(bc) * H * W;
                double* dst = n.val.data() + static_cast<std::int64_t>(bc) * 4 * H * W;
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) {
                        double v = src[h * W + w];
                        dst[(2 * h) * 2 * W + 2 * w] = v;
                        dst[(2 * h) * 2 * W + 2 * w + 1] = v;
                        dst[(2 * h + 1) * 2 * W + 2 * w] = v;
                        dst[(2 * h + 1) * 2 * W + 2 * w + 1] = v;
                    }
            }
            break;
        }
        case Op::DownSum: {
            int B = in0.dim(0), C = in0.dim(1), H = in0.dim(2) / 2, W = in0.dim(3) / 2;
            n.val = Tensor({B, C, H, W});
            for (int bc = 0; bc < B * C; ++bc) {
                const double* src = in0.data() + static_cast<std::int64_t>(bc) * 4 * H * W;
                double* dst = n.val.data() + static_cast<std::int64_t>(bc) * H * W;
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w)
                        dst[h * W + w] = src[(2 * h) * 2 * W + 2 * w] + src[(2 * h) * 2 * W + 2 * w + 1] +
                                         src[(2 * h + 1) * 2 * W + 2 * w] + src[(2 * h + 1) * 2 * W + 2 * w + 1];
            }
            break;
        }
    }
}

void Tape::accumulate(std::unordered_map<int, int>& adj, int target, int contribution) {
    auto it = adj.find(target);
    if (it == adj.end())
        adj[target] = contribution;
    else
        it->second = add(it->second, contribution);
}

std::unordered_map<int, int> Tape::build_adjoints(int output, const std::vector<int>& wrt) {
    if (output < 0 || output >= node_count()) fail("output node not on tape");
    if (val(output).size() != 1) fail("backward requires a scalar output");
    for (int w : wrt)
        if (w < 0 || w >= node_count()) fail("requested gradient for a node not on this tape");

    // A node needs an adjoint only if some requested leaf sits in its input cone.
    std::vector<char> needed(static_cast<std::size_t>(node_count()), 0);
    for (int w : wrt)
        if (w <= output) needed[static_cast<std::size_t>(w)] = 1;
    for (int id = 0; id <= output; ++id) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if ((n.in0 >= 0 && needed[static_cast<std::size_t>(n.in0)]) ||
            (n.in1 >= 0 && needed[static_cast<std::size_t>(n.in1)]))
            needed[static_cast<std::size_t>(id)] = 1;
    }

    std::unordered_map<int, int> adj;
    adj[output] = leaf(Tensor::full(val(output).shape(), 1.0));

    for (int id = output; id >= 0; --id) {
        auto it = adj.find(id);
        if (it == adj.end()) continue;
        const Node n = nodes_[static_cast<std::size_t>(id)];  // copy: emits below may reallocate
        int g = it->second;
        auto want = [&](int input) { return input >= 0 && needed[static_cast<std::size_t>(input)]; };
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Add:
                if (want(n.in0)) accumulate(adj, n.in0, g);
                if (want(n.in1)) accumulate(adj, n.in1, g);
                break;
            case Op::Mul:
                if (want(n.in0)) accumulate(adj, n.in0, mul(g, n.in1));
                if (want(n.in1)) accumulate(adj, n.in1, mul(g, n.in0));
                break;
            case Op::Scale:
                if (want(n.in0)) accumulate(adj, n.in0, scale(g, n.c0));
                break;
            case Op::Shift:
                if (want(n.in0)) accumulate(adj, n.in0, g);
                break;
            case Op::Matmul:
                if (want(n.in0)) accumulate(adj, n.in0, matmul(g, transpose(n.in1)));
                if (want(n.in1)) accumulate(adj, n.in1, matmul(transpose(n.in0), g));
                break;
            case Op::Transpose:
                if (want(n.in0)) accumulate(adj, n.in0, transpose(g));
                break;
            case Op::AddRowVec:
                if (want(n.in0)) accumulate(adj, n.in0, g);
                if (want(n.in1)) accumulate(adj, n.in1, colsum(g));
                break;
            case Op::AddColVec:
                if (want(n.in0)) accumulate(adj, n.in0, g);
                if (want(n.in1)) accumulate(adj, n.in1, rowsum(g));
                break;
            case Op::RowSum:
                if (want(n.in0)) {
                    Node bc;
                    bc.op = Op::BroadcastCols;
                    bc.in0 = g;
                    bc.shape_attr = val(n.in0).shape();
                    accumulate(adj, n.in0, emit(std::move(bc)));
                }
                break;
            case Op::ColSum:
                if (want(n.in0)) {
                    Node br;
                    br.op = Op::BroadcastRows;
                    br.in0 = g;
                    br.shape_attr = val(n.in0).shape();
                    accumulate(adj, n.in0, emit(std::move(br)));
                }
                break;
            case Op::Concat: {
                int d0 = val(n.in0).dim(n.i0);
                int d1 = val(n.in1).dim(n.i0);
                if (want(n.in0)) accumulate(adj, n.in0, slice(g, n.i0, 0, d0));
                if (want(n.in1)) accumulate(adj, n.in1, slice(g, n.i0, d0, d1));
                break;
            }
            case Op::Slice:
                if (want(n.in0)) {
                    Node ps;
                    ps.op = Op::PadSlice;
                    ps.in0 = g;
                    ps.i0 = n.i0;
                    ps.i1 = n.i1;
                    ps.shape_attr = val(n.in0).shape();
                    accumulate(adj, n.in0, emit(std::move(ps)));
                }
                break;
            case Op::PadSlice:
                if (want(n.in0)) accumulate(adj, n.in0, slice(g, n.i0, n.i1, val(n.in0).dim(n.i0)));
                break;
            case Op::LeakyRelu:
                if (want(n.in0)) {
                    Node mask;
                    mask.op = Op::LeakyReluMask;
                    mask.in0 = n.in0;
                    mask.c0 = n.c0;
                    accumulate(adj, n.in0, mul(g, emit(std::move(mask))));
                }
                break;
            case Op::Tanh:
                if (want(n.in0)) accumulate(adj, n.in0, mul(g, shift(scale(square(id), -1.0), 1.0)));
                break;
            case Op::Sigmoid:
                if (want(n.in0)) accumulate(adj, n.in0, mul(g, mul(id, shift(scale(id, -1.0), 1.0))));
                break;
            case Op::Square:
                if (want(n.in0)) accumulate(adj, n.in0, scale(mul(g, n.in0), 2.0));
                break;
            case Op::Sqrt:
                if (want(n.in0)) accumulate(adj, n.in0, scale(mul(g, recip(id)), 0.5));
                break;
            case Op::Recip:
                if (want(n.in0)) accumulate(adj, n.in0, scale(mul(g, square(id)), -1.0));
                break;
            case Op::Log:
                if (want(n.in0)) accumulate(adj, n.in0, mul(g, recip(n.in0)));
                break;
            case Op::Exp:
                if (want(n.in0)) accumulate(adj, n.in0, mul(g, id));
                break;
            case Op::Abs:
                if (want(n.in0)) {
                    Node mask;
                    mask.op = Op::SignMask;
                    mask.in0 = n.in0;
                    accumulate(adj, n.in0, mul(g, emit(std::move(mask))));
                }
                break;
            case Op::Clamp:
                if (want(n.in0)) {
                    Node mask;
                    mask.op = Op::ClampMask;
                    mask.in0 = n.in0;
                    mask.c0 = n.c0;
                    mask.c1 = n.c1;
                    accumulate(adj, n.in0, mul(g, emit(std::move(mask))));
                }
                break;
            case Op::LeakyReluMask:
            case Op::SignMask:
            case Op::ClampMask:
                break;  // derivative zero everywhere (a.e.)
            case Op::Sum:
                if (want(n.in0)) {
                    Node bf;
                    bf.op = Op::BroadcastFull;
                    bf.in0 = g;
                    bf.shape_attr = val(n.in0).shape();
                    accumulate(adj, n.in0, emit(std::move(bf)));
                }
                break;
            case Op::Mean:
                if (want(n.in0)) {
                    Node bf;
                    bf.op = Op::BroadcastFull;
                    bf.in0 = g;
                    bf.shape_attr = val(n.in0).shape();
                    accumulate(adj, n.in0, scale(emit(std::move(bf)), 1.0 / static_cast<double>(val(n.in0).size())));
                }
                break;
            case Op::BroadcastFull:
                if (want(n.in0)) accumulate(adj, n.in0, sum(g));
                break;
            case Op::BroadcastCols:
                if (want(n.in0)) accumulate(adj, n.in0, rowsum(g));
                break;
            case Op::BroadcastRows:
                if (want(n.in0)) accumulate(adj, n.in0, colsum(g));
                break;
            case Op::Conv2d: {
                if (want(n.in0)) {
                    Node ig;
                    ig.op = Op::Conv2dInputGrad;
                    ig.in0 = g;
                    ig.in1 = n.in1;
                    ig.i0 = n.i0;
                    ig.shape_attr = val(n.in0).shape();
                    accumulate(adj, n.in0, emit(std::move(ig)));
                }
                if (want(n.in1)) {
                    Node wg;
                    wg.op = Op::Conv2dWeightGrad;
                    wg.in0 = n.in0;
                    wg.in1 = g;
                    wg.i0 = n.i0;
                    wg.shape_attr = val(n.in1).shape();
                    accumulate(adj, n.in1, emit(std::move(wg)));
                }
                break;
            }
            case Op::ChanBias:
                if (want(n.in0)) accumulate(adj, n.in0, g);
                if (want(n.in1)) {
                    Node cs;
                    cs.op = Op::ChanSum;
                    cs.in0 = g;
                    accumulate(adj, n.in1, emit(std::move(cs)));
                }
                break;
            case Op::ChanSum:
                if (want(n.in0)) {
                    Node cb;
                    cb.op = Op::ChanBroadcast;
                    cb.in0 = g;
                    cb.shape_attr = val(n.in0).shape();
                    accumulate(adj, n.in0, emit(std::move(cb)));
                }
                break;
            case Op::ChanBroadcast:
                if (want(n.in0)) {
                    Node cs;
                    cs.op = Op::ChanSum;
                    cs.in0 = g;
                    accumulate(adj, n.in0, emit(std::move(cs)));
                }
                break;
            case Op::UpsampleNN:
                if (want(n.in0)) {
                    Node ds;
                    ds.op = Op::DownSum;
                    ds.in0 = g;
                    accumulate(adj, n.in0, emit(std::move(ds)));
                }
                break;
            case Op::DownSum:
                if (want(n.in0)) accumulate(adj, n.in0, upsample_nn2(g));
                break;
            case Op::Conv2dInputGrad:
            case Op::Conv2dWeightGrad:
                if (want(n.in0) || want(n.in1))
                    fail("op without a registered second-order adjoint on the differentiation path");
                break;
        }
    }
    return adj;
}

std::unordered_map<int, Tensor> Tape::backward(int output, const std::vector<int>& wrt) {
    auto adj = build_adjoints(output, wrt);
    std::unordered_map<int, Tensor> grads;
    for (int w : wrt) {
        auto it = adj.find(w);
        grads[w] = it == adj.end() ? Tensor::zeros(val(w).shape()) : val(it->second);
    }
    return grads;
}

int Tape::gradient_node(int output, int wrt) {
    auto adj = build_adjoints(output, {wrt});
    auto it = adj.find(wrt);
    if (it == adj.end()) return leaf(Tensor::zeros(val(wrt).shape()));
    return it->second;
}

}  // namespace poseforge
