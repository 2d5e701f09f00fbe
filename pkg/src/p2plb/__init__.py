"""Cluster-based replica placement and load balancing simulator for P2P
content-distribution overlays."""

from .balancing import (BalancingConfig, ClusterSnapshot, HotItemList,
                        LoadReport, MoveReason, ReplicationMove,
                        availability_replicate, cleanup_replicas,
                        compute_cluster_load, inter_cluster_balance,
                        intra_cluster_balance, plan_inter_moves)
from .clustering import (Cluster, ClusteringConfig, NodeWeight, Partition,
                         build_clusters, compute_weight, default_beta,
                         elect_leader, form_clusters, node_weights,
                         partition_nodes)
from .config import (ScenarioConfig, SweepSpec, build_simulation,
                     load_scenario, scenario_from_dict)
from .dump import dump_json, dump_state, verify_dump
from .engine import EventKind, MetricsReport, Simulation, run_scenario
from .errors import (ConfigurationError, RoutingError, SimulationError,
                     UnknownContentError, UnknownPeerError)
from .placement import (CLASS1, CLASS2, ContentItem, PlacementConfig,
                        PlacementPlan, QueryRecord, QueryServer, ReplicaStore,
                        ReplicationAnnouncement, classify_content,
                        execute_placement, plan_placement, register_query,
                        route_query)
from .topology import (AttributeRanges, PeerNode, Topology, build_topology,
                       e2e_delay, transfer_time)
from .workload import WorkloadConfig, ZipfSampler, generate_queries

__version__ = "0.1.0"
