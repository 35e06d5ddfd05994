/* Copyright 2026 The lvcal Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef LVCAL_GEOMETRY_H_
#define LVCAL_GEOMETRY_H_

namespace lvcal {

// Axis-aligned rectangle in continuous scene units, corner coordinates.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x2 > x1 && y2 > y1; }

  friend bool operator==(const Box&, const Box&) = default;
};

// Intersection over union. Symmetric, in [0,1]; 0 when either box is empty.
double iou(const Box& a, const Box& b);

}  // namespace lvcal

#endif  // LVCAL_GEOMETRY_H_
