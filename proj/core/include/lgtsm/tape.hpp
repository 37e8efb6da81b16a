// Copyright 2026 The LGTSM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lgtsm/tensor.hpp"

namespace lgtsm {

// Eager reverse-mode recorder. While a Tape is active on the current thread
// (see Tape::Recording), every op whose inputs need gradients appends a node.
// Nodes are stored in execution order, so the list is already topologically
// sorted and backward() is a single reverse sweep.
class Tape {
 public:
  // grad_inputs[i] is undefined when input i needs no gradient; otherwise it
  // is a zero-initialized (or partially accumulated) tensor of the input's
  // shape and the rule must add into it.
  using BackwardFn =
      std::function<void(const Tensor& grad_output, std::span<Tensor> grad_inputs)>;

  struct Node {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Propagates d(loss)/d(.) to every requires_grad leaf reachable from loss.
  // Leaf gradients accumulate across calls; intermediate gradients are local
  // to each call.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  void clear();

  // True when t is a requires_grad leaf or an output recorded on this tape.
  bool tracks(const Tensor& t) const;

  static Tape* active();

  // Records `output = op(inputs)` on the active tape if any input is tracked.
  // Returns true when a node was recorded.
  static bool record(std::string op, std::vector<Tensor> inputs, const Tensor& output,
                     BackwardFn backward);

  class Recording {
   public:
    explicit Recording(Tape& tape);
    ~Recording();
    Recording(const Recording&) = delete;
    Recording& operator=(const Recording&) = delete;

   private:
    Tape* previous_;
  };

  // Suspends recording for the current thread (inference inside training).
  class Paused {
   public:
    Paused();
    ~Paused();
    Paused(const Paused&) = delete;
    Paused& operator=(const Paused&) = delete;

   private:
    Tape* previous_;
  };

 private:
  std::uint64_t id_;
  std::vector<Node> nodes_;
};

}  // namespace lgtsm
