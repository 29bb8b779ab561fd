#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "poseforge/tensor.hpp"

namespace poseforge {

enum class Op : std::uint8_t {
    Leaf,
    Add,
    Mul,
    Scale,
    Shift,
    Matmul,
    Transpose,
    AddRowVec,
    AddColVec,
    RowSum,
    ColSum,
    Concat,
    Slice,
    PadSlice,
    LeakyRelu,
    LeakyReluMask,
    Tanh,
    Sigmoid,
    Square,
    Sqrt,
    Recip,
    Log,
    Exp,
    Abs,
    SignMask,
    Clamp,
    ClampMask,
    Sum,
    Mean,
    BroadcastFull,
    BroadcastCols,
    BroadcastRows,
    Conv2d,
    Conv2dInputGrad,
    Conv2dWeightGrad,
    ChanBias,
    ChanSum,
    ChanBroadcast,
    UpsampleNN,
    DownSum,
};

struct Node {
    Op op = Op::Leaf;
    int in0 = -1;
    int in1 = -1;
    double c0 = 0.0;  // scale factor / clamp lo / activation slope
    double c1 = 0.0;  // clamp hi
    int i0 = 0;       // axis / stride
    int i1 = 0;       // slice start
    int i2 = 0;       // slice length
    std::vector<int> shape_attr;  // broadcast / pad target shape
    Tensor val;
};

// Append-only computation graph. Node values are computed eagerly on append
// and every result is checked finite. backward() builds the adjoint as
// ordinary nodes on the same tape, so gradients are themselves
// differentiable wherever every traversed op has a registered adjoint.
class Tape {
public:
    int leaf(Tensor value);

    const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    int node_count() const { return static_cast<int>(nodes_.size()); }

    // Elementwise / linear algebra
    int add(int a, int b);
    int sub(int a, int b);  // add(a, scale(b,-1))
    int mul(int a, int b);
    int scale(int a, double c);
    int shift(int a, double c);
    int matmul(int a, int b);
    int transpose(int a);
    int add_rowvec(int m, int v);  // [R x C] + [C] per row
    int add_colvec(int m, int v);  // [R x C] + [R] per column
    int rowsum(int m);             // [R x C] -> [R]
    int colsum(int m);             // [R x C] -> [C]

    // Structure
    int concat(int a, int b, int axis);
    int slice(int a, int axis, int start, int len);

    // Nonlinearities
    int leaky_relu(int a, double slope = 0.2);
    int tanh(int a);
    int sigmoid(int a);
    int square(int a);
    int sqrt(int a);
    int recip(int a);
    int log(int a);
    int exp(int a);
    int abs(int a);
    int clamp(int a, double lo, double hi);

    // Reductions / broadcasts
    int sum(int a);
    int mean(int a);
    int l2norm(int a);  // sqrt(sum(square(a))), composite

    // Convolution path ([B,C,H,W]; kernels 3x3/5x5, stride 1/2, same padding)
    int conv2d(int x, int w, int stride);
    int chan_bias(int x, int b);
    int upsample_nn2(int x);

    // Reverse mode. `output` must be scalar; returns one gradient tensor per
    // requested leaf (zero tensor when the leaf does not reach the output).
    std::unordered_map<int, Tensor> backward(int output, const std::vector<int>& wrt);

    // Gradient as a first-class node, available for further differentiation.
    int gradient_node(int output, int wrt);

private:
    int emit(Node n);
    void eval(Node& n) const;
    std::unordered_map<int, int> build_adjoints(int output, const std::vector<int>& wrt);
    void accumulate(std::unordered_map<int, int>& adj, int target, int contribution);

    std::vector<Node> nodes_;
};

}  // namespace poseforge
