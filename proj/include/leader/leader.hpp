#pragma once

#include <leader/cmr.hpp>
#include <leader/config.hpp>
#include <leader/eval/matching.hpp>
#include <leader/eval/pca.hpp>
#include <leader/eval/ranking.hpp>
#include <leader/io/config_file.hpp>
#include <leader/io/csv.hpp>
#include <leader/io/image.hpp>
#include <leader/io/minutiae_file.hpp>
#include <leader/io/svg.hpp>
#include <leader/io/weights_file.hpp>
#include <leader/losses.hpp>
#include <leader/minutiae.hpp>
#include <leader/model.hpp>
#include <leader/ops.hpp>
#include <leader/postprocess.hpp>
#include <leader/runtime.hpp>
#include <leader/tensor.hpp>
#include <leader/weights.hpp>
