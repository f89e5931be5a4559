#pragma once

#include <stdexcept>
#include <string>

namespace hiergen {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HIERGEN_DEFINE_ERROR(Name)              \
  class Name : public Error {                   \
   public:                                      \
    explicit Name(const std::string& what)      \
        : Error(std::string(#Name ": ") + what) {} \
  };

HIERGEN_DEFINE_ERROR(EmptyArticle)
HIERGEN_DEFINE_ERROR(InvalidId)
HIERGEN_DEFINE_ERROR(NoContent)
HIERGEN_DEFINE_ERROR(AlignmentError)
HIERGEN_DEFINE_ERROR(ShapeError)
HIERGEN_DEFINE_ERROR(NumericalError)
HIERGEN_DEFINE_ERROR(EmptyBatch)
HIERGEN_DEFINE_ERROR(DivergedError)
HIERGEN_DEFINE_ERROR(IncompatibleCheckpoint)
HIERGEN_DEFINE_ERROR(CorruptCheckpoint)
HIERGEN_DEFINE_ERROR(VocabMismatch)
HIERGEN_DEFINE_ERROR(IoError)

#undef HIERGEN_DEFINE_ERROR

}  // namespace hiergen
