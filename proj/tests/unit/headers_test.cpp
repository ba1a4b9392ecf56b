#include <gtest/gtest.h>

#include "zrnorm/abx.hpp"
#include "zrnorm/cluster_metrics.hpp"
#include "zrnorm/forest.hpp"
#include "zrnorm/lm_tasks.hpp"
#include "zrnorm/mfcc.hpp"
#include "zrnorm/probe.hpp"
#include "zrnorm/synthetic.hpp"
#include "zrnorm/verify.hpp"
#include "zrnorm/wav.hpp"
#include "zrnorm/pipeline.hpp"

TEST(Headers, Compile) { SUCCEED(); }
