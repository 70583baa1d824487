#include "panofuse/image.h"

#include <omp.h>

#include "panofuse/parallel.h"

namespace panofuse {

ImageD ToGray(const ImageD& image) {
  if (image.channels() == 1) return image;
  if (image.channels() != 3) {
    throw InvalidInput("grayscale conversion expects 1 or 3 channels, got " +
                       std::to_string(image.channels()));
  }
  ImageD gray(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      gray.at(x, y) = 0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) +
                      0.114 * image.at(x, y, 2);
    }
  }
  return gray;
}

int HardwareJobs() { return omp_get_max_threads(); }

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kIo:
      return 3;
    case ErrorKind::kBounds:
    case ErrorKind::kInvalidInput:
    case ErrorKind::kDegenerate:
    case ErrorKind::kInternal:
      return 4;
  }
  return 4;
}

}  // namespace panofuse
