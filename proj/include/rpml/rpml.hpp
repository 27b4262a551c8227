#ifndef RPML_RPML_HPP_
#define RPML_RPML_HPP_

#include "rpml/common.hpp"
#include "rpml/dataset.hpp"
#include "rpml/eval.hpp"
#include "rpml/graph_cluster.hpp"
#include "rpml/loss.hpp"
#include "rpml/manifold.hpp"
#include "rpml/rng.hpp"
#include "rpml/trainer.hpp"
#include "rpml/triplets.hpp"

#endif // RPML_RPML_HPP_
