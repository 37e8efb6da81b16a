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

#include "lgtsm/tape.hpp"

#include <atomic>

namespace lgtsm {

namespace {

std::atomic<std::uint64_t> g_next_tape_id{1};
thread_local Tape* g_active = nullptr;

}  // namespace

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

Tape::~Tape() {
  if (g_active == this) g_active = nullptr;
}

void Tape::clear() {
  for (auto& node : nodes_) {
    if (node.output.defined()) node.output.impl()->tape_id = 0;
  }
  nodes_.clear();
}

bool Tape::tracks(const Tensor& t) const {
  if (!t.defined()) return false;
  return t.requires_grad() || t.impl()->tape_id == id_;
}

Tape* Tape::active() { return g_active; }

bool Tape::record(std::string op, std::vector<Tensor> inputs, const Tensor& output,
                  BackwardFn backward) {
  Tape* tape = g_active;
  if (tape == nullptr) return false;
  bool any = false;
  for (const auto& in : inputs) any = any || tape->tracks(in);
  if (!any) return false;
  output.impl()->tape_id = tape->id_;
  output.impl()->node_index = tape->nodes_.size();
  tape->nodes_.push_back(Node{std::move(op), std::move(inputs), output, std::move(backward)});
  return true;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward: loss must have exactly one element, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  auto leaf_grad = [](const Tensor& t) {
    auto* impl = t.impl();
    if (!impl->grad) impl->grad = Tensor::zeros(t.shape(), t.dtype()).impl_ptr();
    return Tensor(impl->grad);
  };

  if (loss.impl()->tape_id != id_) {
    if (loss.requires_grad()) {
      Tensor g = leaf_grad(loss);
      g.set(0, g.at(0) + 1.0);
    }
    return;
  }

  std::vector<Tensor> grads(nodes_.size());
  grads[loss.impl()->node_index] = Tensor::full(loss.shape(), 1.0, loss.dtype());

  std::vector<Tensor> slots;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (!grads[i].defined()) continue;
    Node& node = nodes_[i];
    slots.assign(node.inputs.size(), Tensor());
    bool any = false;
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const Tensor& in = node.inputs[k];
      if (!in.defined()) continue;
      auto* impl = in.impl();
      if (impl->tape_id == id_ && impl->node_index < i) {
        auto j = impl->node_index;
        if (!grads[j].defined()) grads[j] = Tensor::zeros(in.shape(), in.dtype());
        slots[k] = grads[j];
        any = true;
      } else if (in.requires_grad()) {
        slots[k] = leaf_grad(in);
        any = true;
      }
    }
    if (any) node.backward(grads[i], slots);
    grads[i] = Tensor();
  }
}

Tape::Recording::Recording(Tape& tape) : previous_(g_active) { g_active = &tape; }
Tape::Recording::~Recording() { g_active = previous_; }

Tape::Paused::Paused() : previous_(g_active) { g_active = nullptr; }
Tape::Paused::~Paused() { g_active = previous_; }

}  // namespace lgtsm
