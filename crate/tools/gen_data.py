#!/usr/bin/env python3
"""Regenerates the shipped catalog, metric-schema and synthetic-model data files.

Usage: python3 tools/gen_data.py   (run from the repository root)
"""
import json
import math

KiB, MiB, GiB = 1024, 1024**2, 1024**3


def num(name, kind, lo, hi, default, scale="linear", unit="count", restart=False):
    return {"name": name, "kind": kind, "min": lo, "max": hi, "default": default,
            "enum_values": [], "scale": scale, "unit": unit, "restart_required": restart}


def enum(name, values, default, restart=False):
    return {"name": name, "kind": "enum", "min": None, "max": None, "default": default,
            "enum_values": values, "scale": "linear", "unit": "", "restart_required": restart}


def boolean(name, default, restart=False):
    return {"name": name, "kind": "boolean", "min": None, "max": None, "default": default,
            "enum_values": [], "scale": "linear", "unit": "", "restart_required": restart}


def nbytes(name, lo, hi, default, restart=False):
    return num(name, "integer", lo, hi, default, "log", "bytes", restart)


# ---------------------------------------------------------------------------
# 266-knob MySQL 8.0 style catalog
# ---------------------------------------------------------------------------
MYSQL = [
    nbytes("innodb_buffer_pool_size", 5 * MiB, 256 * GiB, 128 * MiB, True),
    nbytes("innodb_log_file_size", 4 * MiB, 16 * GiB, 48 * MiB, True),
    nbytes("innodb_log_buffer_size", 256 * KiB, 4 * GiB, 16 * MiB),
    nbytes("innodb_redo_log_capacity", 8 * MiB, 128 * GiB, 100 * MiB),
    nbytes("innodb_buffer_pool_chunk_size", 1 * MiB, 4 * GiB, 128 * MiB, True),
    num("innodb_buffer_pool_instances", "integer", 1, 64, 8, restart=True),
    num("innodb_buffer_pool_dump_pct", "integer", 1, 100, 25, unit="percent"),
    boolean("innodb_buffer_pool_dump_at_shutdown", True),
    boolean("innodb_buffer_pool_load_at_startup", True, True),
    num("innodb_io_capacity", "integer", 100, 100000, 200, "log"),
    num("innodb_io_capacity_max", "integer", 100, 200000, 2000, "log"),
    num("innodb_read_io_threads", "integer", 1, 64, 4, restart=True),
    num("innodb_write_io_threads", "integer", 1, 64, 4, restart=True),
    num("innodb_thread_concurrency", "integer", 0, 1000, 0),
    num("innodb_thread_sleep_delay", "integer", 0, 1000000, 10000, unit="microseconds"),
    num("innodb_concurrency_tickets", "integer", 1, 4294967295, 5000, "log"),
    num("innodb_commit_concurrency", "integer", 0, 1000, 0, restart=True),
    num("innodb_adaptive_max_sleep_delay", "integer", 0, 1000000, 150000, unit="microseconds"),
    enum("innodb_flush_log_at_trx_commit", ["0", "1", "2"], "1"),
    enum("innodb_flush_method", ["fsync", "O_DSYNC", "littlesync", "nosync", "O_DIRECT", "O_DIRECT_NO_FSYNC"], "fsync", True),
    num("innodb_flush_log_at_timeout", "integer", 1, 2700, 1, unit="seconds"),
    enum("innodb_flush_neighbors", ["0", "1", "2"], "0"),
    boolean("innodb_flush_sync", True),
    num("innodb_flushing_avg_loops", "integer", 1, 1000, 30),
    boolean("innodb_adaptive_flushing", True),
    num("innodb_adaptive_flushing_lwm", "integer", 0, 70, 10, unit="percent"),
    boolean("innodb_adaptive_hash_index", False),
    num("innodb_adaptive_hash_index_parts", "integer", 1, 512, 8, restart=True),
    num("innodb_autoextend_increment", "integer", 1, 1000, 64, unit="megabytes"),
    enum("innodb_autoinc_lock_mode", ["0", "1", "2"], "2", True),
    num("innodb_change_buffer_max_size", "integer", 0, 50, 25, unit="percent"),
    enum("innodb_change_buffering", ["none", "inserts", "deletes", "changes", "purges", "all"], "none"),
    enum("innodb_checksum_algorithm", ["crc32", "strict_crc32", "innodb", "strict_innodb", "none", "strict_none"], "crc32"),
    boolean("innodb_cmp_per_index_enabled", False),
    num("innodb_compression_failure_threshold_pct", "integer", 0, 100, 5, unit="percent"),
    num("innodb_compression_level", "integer", 0, 9, 6),
    num("innodb_compression_pad_pct_max", "integer", 0, 75, 50, unit="percent"),
    boolean("innodb_deadlock_detect", True),
    boolean("innodb_disable_sort_file_cache", False),
    boolean("innodb_doublewrite", True, True),
    num("innodb_doublewrite_batch_size", "integer", 0, 256, 0, restart=True),
    num("innodb_doublewrite_pages", "integer", 1, 512, 64, restart=True),
    num("innodb_doublewrite_files", "integer", 2, 256, 2, restart=True),
    enum("innodb_fast_shutdown", ["0", "1", "2"], "1"),
    num("innodb_fill_factor", "integer", 10, 100, 100, unit="percent"),
    nbytes("innodb_ft_cache_size", 1600000, 80000000, 8000000, True),
    boolean("innodb_ft_enable_diag_print", False),
    num("innodb_ft_max_token_size", "integer", 10, 84, 84, restart=True),
    num("innodb_ft_min_token_size", "integer", 0, 16, 3, restart=True),
    num("innodb_ft_num_word_optimize", "integer", 1000, 10000, 2000),
    nbytes("innodb_ft_result_cache_limit", 1000000, 4294967295, 2000000000),
    num("innodb_ft_sort_pll_degree", "integer", 1, 16, 2, restart=True),
    nbytes("innodb_ft_total_cache_size", 32000000, 1600000000, 640000000, True),
    num("innodb_lock_wait_timeout", "integer", 1, 1073741824, 50, "log", "seconds"),
    boolean("innodb_log_checksums", True),
    boolean("innodb_log_compressed_pages", True),
    num("innodb_log_files_in_group", "integer", 2, 100, 2, restart=True),
    num("innodb_log_spin_cpu_abs_lwm", "integer", 0, 4294967295, 80),
    num("innodb_log_spin_cpu_pct_hwm", "integer", 0, 100, 50, unit="percent"),
    num("innodb_log_wait_for_flush_spin_hwm", "integer", 0, 4294967295, 400, unit="microseconds"),
    nbytes("innodb_log_write_ahead_size", 512, 16 * KiB, 8 * KiB),
    boolean("innodb_log_writer_threads", True),
    num("innodb_lru_scan_depth", "integer", 100, 4294967295, 1024, "log"),
    num("innodb_max_dirty_pages_pct", "real", 0.0, 99.999, 90.0, unit="percent"),
    num("innodb_max_dirty_pages_pct_lwm", "real", 0.0, 99.999, 10.0, unit="percent"),
    num("innodb_max_purge_lag", "integer", 0, 4294967295, 0, unit="count"),
    num("innodb_max_purge_lag_delay", "integer", 0, 10000000, 0, unit="microseconds"),
    nbytes("innodb_max_undo_log_size", 10 * MiB, 1 << 40, 1 * GiB),
    num("innodb_old_blocks_pct", "integer", 5, 95, 37, unit="percent"),
    num("innodb_old_blocks_time", "integer", 0, 4294967295, 1000, unit="milliseconds"),
    nbytes("innodb_online_alter_log_max_size", 64 * KiB, 1 << 40, 128 * MiB),
    num("innodb_open_files", "integer", 10, 2147483647, 4000, "log", restart=True),
    boolean("innodb_optimize_fulltext_only", False),
    num("innodb_page_cleaners", "integer", 1, 64, 4, restart=True),
    num("innodb_parallel_read_threads", "integer", 1, 256, 4),
    boolean("innodb_print_all_deadlocks", False),
    num("innodb_purge_batch_size", "integer", 1, 5000, 300),
    num("innodb_purge_rseg_truncate_frequency", "integer", 1, 128, 128),
    num("innodb_purge_threads", "integer", 1, 32, 4, restart=True),
    boolean("innodb_random_read_ahead", False),
    num("innodb_read_ahead_threshold", "integer", 0, 64, 56),
    boolean("innodb_rollback_on_timeout", False, True),
    num("innodb_rollback_segments", "integer", 1, 128, 128),
    nbytes("innodb_sort_buffer_size", 64 * KiB, 64 * MiB, 1 * MiB, True),
    num("innodb_spin_wait_delay", "integer", 0, 1000, 6),
    num("innodb_spin_wait_pause_multiplier", "integer", 0, 100, 50),
    boolean("innodb_stats_auto_recalc", True),
    boolean("innodb_stats_include_delete_marked", False),
    enum("innodb_stats_method", ["nulls_equal", "nulls_unequal", "nulls_ignored"], "nulls_equal"),
    boolean("innodb_stats_on_metadata", False),
    boolean("innodb_stats_persistent", True),
    num("innodb_stats_persistent_sample_pages", "integer", 1, 65535, 20, "log"),
    num("innodb_stats_transient_sample_pages", "integer", 1, 65535, 8, "log"),
    boolean("innodb_status_output", False),
    boolean("innodb_status_output_locks", False),
    boolean("innodb_strict_mode", True),
    num("innodb_sync_array_size", "integer", 1, 1024, 1, restart=True),
    num("innodb_sync_spin_loops", "integer", 0, 4294967295, 30),
    boolean("innodb_table_locks", True),
    boolean("innodb_undo_log_truncate", True),
    boolean("innodb_use_native_aio", True, True),
    boolean("innodb_dedicated_server", False, True),
    boolean("innodb_file_per_table", True),
    num("innodb_segment_reserve_factor", "real", 0.03, 40.0, 12.5, unit="percent"),
    num("innodb_idle_flush_pct", "integer", 0, 100, 100, unit="percent"),
    nbytes("innodb_ddl_buffer_size", 64 * KiB, 4 * GiB, 1 * MiB),
    num("innodb_ddl_threads", "integer", 1, 64, 4),
    boolean("innodb_extend_and_initialize", True),
    num("innodb_undo_tablespaces", "integer", 2, 127, 2),
    num("innodb_api_bk_commit_interval", "integer", 1, 1073741824, 5, "log", "seconds"),
    enum("innodb_api_trx_level", ["0", "1", "2", "3"], "0"),
    boolean("innodb_api_enable_binlog", False, True),
    boolean("innodb_api_enable_mdl", False, True),
    num("innodb_compression_pad_pct", "integer", 0, 75, 50, unit="percent"),
    # server-wide
    num("max_connections", "integer", 1, 100000, 151, "log"),
    num("max_user_connections", "integer", 0, 4294967295, 0),
    num("max_connect_errors", "integer", 1, 4294967295, 100, "log"),
    num("back_log", "integer", 1, 65535, 151, "log", restart=True),
    num("thread_cache_size", "integer", 0, 16384, 9),
    nbytes("thread_stack", 128 * KiB, 16 * MiB, 1 * MiB, True),
    nbytes("sort_buffer_size", 32 * KiB, 4 * GiB, 256 * KiB),
    nbytes("join_buffer_size", 128, 4 * GiB, 256 * KiB),
    nbytes("read_buffer_size", 8 * KiB, 2 * GiB, 128 * KiB),
    nbytes("read_rnd_buffer_size", 1, 2 * GiB, 256 * KiB),
    nbytes("tmp_table_size", 1 * KiB, 16 * GiB, 16 * MiB),
    nbytes("max_heap_table_size", 16 * KiB, 16 * GiB, 16 * MiB),
    nbytes("temptable_max_ram", 2 * MiB, 64 * GiB, 1 * GiB),
    nbytes("temptable_max_mmap", 1, 64 * GiB, 1 * GiB),
    boolean("temptable_use_mmap", True),
    enum("internal_tmp_mem_storage_engine", ["MEMORY", "TempTable"], "TempTable"),
    boolean("big_tables", False),
    nbytes("key_buffer_size", 8, 64 * GiB, 8 * MiB),
    num("key_cache_age_threshold", "integer", 100, 4294967295, 300, "log"),
    nbytes("key_cache_block_size", 512, 16 * KiB, 1 * KiB),
    num("key_cache_division_limit", "integer", 1, 100, 100, unit="percent"),
    nbytes("bulk_insert_buffer_size", 1, 4 * GiB, 8 * MiB),
    nbytes("preload_buffer_size", 1 * KiB, 1 * GiB, 32 * KiB),
    nbytes("myisam_sort_buffer_size", 4 * KiB, 16 * GiB, 8 * MiB),
    nbytes("myisam_max_sort_file_size", 1 * MiB, 1 << 50, 1 << 43),
    nbytes("myisam_mmap_size", 7, 1 << 50, 1 << 50, True),
    num("myisam_data_pointer_size", "integer", 2, 7, 6),
    num("myisam_repair_threads", "integer", 1, 64, 1),
    enum("myisam_stats_method", ["nulls_unequal", "nulls_equal", "nulls_ignored"], "nulls_unequal"),
    boolean("myisam_use_mmap", False),
    enum("concurrent_insert", ["NEVER", "AUTO", "ALWAYS"], "AUTO"),
    enum("delay_key_write", ["OFF", "ON", "ALL"], "ON"),
    num("delayed_insert_limit", "integer", 1, 4294967295, 100, "log"),
    num("delayed_insert_timeout", "integer", 1, 31536000, 300, "log", "seconds"),
    num("delayed_queue_size", "integer", 1, 4294967295, 1000, "log"),
    num("max_delayed_threads", "integer", 0, 16384, 20),
    num("max_insert_delayed_threads", "integer", 0, 16384, 20),
    boolean("low_priority_updates", False),
    num("max_write_lock_count", "integer", 1, 4294967295, 4294967295, "log"),
    num("table_open_cache", "integer", 1, 524288, 4000, "log"),
    num("table_open_cache_instances", "integer", 1, 64, 16, restart=True),
    num("table_definition_cache", "integer", 400, 524288, 2000, "log"),
    num("tablespace_definition_cache", "integer", 256, 524288, 256, "log"),
    num("schema_definition_cache", "integer", 256, 524288, 256, "log"),
    num("stored_program_cache", "integer", 16, 524288, 256, "log"),
    num("stored_program_definition_cache", "integer", 256, 524288, 256, "log"),
    num("open_files_limit", "integer", 0, 1048576, 5000, restart=True),
    num("host_cache_size", "integer", 0, 65536, 279),
    nbytes("max_allowed_packet", 1 * KiB, 1 * GiB, 64 * MiB),
    nbytes("net_buffer_length", 1 * KiB, 1 * MiB, 16 * KiB),
    num("net_read_timeout", "integer", 1, 31536000, 30, "log", "seconds"),
    num("net_write_timeout", "integer", 1, 31536000, 60, "log", "seconds"),
    num("net_retry_count", "integer", 1, 4294967295, 10, "log"),
    num("connect_timeout", "integer", 2, 31536000, 10, "log", "seconds"),
    num("interactive_timeout", "integer", 1, 31536000, 28800, "log", "seconds"),
    num("wait_timeout", "integer", 1, 31536000, 28800, "log", "seconds"),
    num("lock_wait_timeout", "integer", 1, 31536000, 31536000, "log", "seconds"),
    num("max_execution_time", "integer", 0, 4294967295, 0, unit="milliseconds"),
    num("long_query_time", "real", 0.0, 31536000.0, 10.0, unit="seconds"),
    num("min_examined_row_limit", "integer", 0, 4294967295, 0),
    num("slow_launch_time", "integer", 0, 31536000, 2, unit="seconds"),
    boolean("slow_query_log", False),
    boolean("general_log", False),
    boolean("log_queries_not_using_indexes", False),
    boolean("log_slow_admin_statements", False),
    num("log_throttle_queries_not_using_indexes", "integer", 0, 4294967295, 0),
    num("max_error_count", "integer", 0, 65535, 1024),
    num("max_join_size", "integer", 1, 18446744073709551615, 18446744073709551615, "log"),
    num("max_length_for_sort_data", "integer", 4, 8388608, 4096, "log"),
    num("max_seeks_for_key", "integer", 1, 4294967295, 4294967295, "log"),
    num("max_sort_length", "integer", 4, 8388608, 1024, "log"),
    num("max_sp_recursion_depth", "integer", 0, 255, 0),
    num("max_prepared_stmt_count", "integer", 0, 4194304, 16382),
    num("max_points_in_geometry", "integer", 3, 1048576, 65536, "log"),
    num("cte_max_recursion_depth", "integer", 0, 4294967295, 1000),
    num("div_precision_increment", "integer", 0, 30, 4),
    num("eq_range_index_dive_limit", "integer", 0, 4294967295, 200),
    num("optimizer_prune_level", "integer", 0, 1, 1),
    num("optimizer_search_depth", "integer", 0, 62, 62),
    num("optimizer_trace_limit", "integer", 0, 2147483647, 1),
    num("optimizer_trace_offset", "integer", -2147483647, 2147483647, -1),
    nbytes("optimizer_trace_max_mem_size", 1, 4294967295, 1 * MiB),
    nbytes("range_optimizer_max_mem_size", 1, 1 << 40, 8 * MiB),
    nbytes("histogram_generation_max_mem_size", 1000000, 1 << 40, 20000000),
    nbytes("parser_max_mem_size", 10000000, 1 << 50, 1 << 50),
    nbytes("query_alloc_block_size", 1 * KiB, 4 * GiB, 8 * KiB),
    nbytes("query_prealloc_size", 8 * KiB, 4 * GiB, 8 * KiB),
    nbytes("range_alloc_block_size", 4 * KiB, 4 * GiB, 4 * KiB),
    nbytes("transaction_alloc_block_size", 1 * KiB, 128 * KiB, 8 * KiB),
    nbytes("transaction_prealloc_size", 1 * KiB, 128 * KiB, 4 * KiB),
    num("regexp_stack_limit", "integer", 0, 2147483647, 8000000),
    num("regexp_time_limit", "integer", 0, 2147483647, 32),
    nbytes("select_into_buffer_size", 8 * KiB, 2 * GiB, 128 * KiB),
    boolean("select_into_disk_sync", False),
    num("select_into_disk_sync_delay", "integer", 0, 31536000, 0, unit="milliseconds"),
    boolean("sql_buffer_result", False),
    enum("transaction_isolation", ["READ-UNCOMMITTED", "READ-COMMITTED", "REPEATABLE-READ", "SERIALIZABLE"], "REPEATABLE-READ"),
    boolean("updatable_views_with_limit", True),
    boolean("end_markers_in_json", False),
    num("flush_time", "integer", 0, 31536000, 0, unit="seconds"),
    boolean("flush", False),
    num("ft_max_word_len", "integer", 10, 84, 84, restart=True),
    num("ft_min_word_len", "integer", 1, 84, 4, restart=True),
    num("ft_query_expansion_limit", "integer", 0, 1000, 20, restart=True),
    num("group_concat_max_len", "integer", 4, 4294967295, 1024, "log"),
    boolean("large_pages", False, True),
    # binary log and replication
    nbytes("binlog_cache_size", 4 * KiB, 16 * GiB, 32 * KiB),
    nbytes("binlog_stmt_cache_size", 4 * KiB, 16 * GiB, 32 * KiB),
    nbytes("max_binlog_cache_size", 4 * KiB, 1 << 50, 1 << 50),
    nbytes("max_binlog_stmt_cache_size", 4 * KiB, 1 << 50, 1 << 50),
    nbytes("max_binlog_size", 4 * KiB, 1 * GiB, 1 * GiB),
    nbytes("max_relay_log_size", 0 + 4 * KiB, 1 * GiB, 1 * GiB),
    nbytes("relay_log_space_limit", 1, 1 << 50, 1 << 50),
    num("binlog_expire_logs_seconds", "integer", 0, 4294967295, 2592000, unit="seconds"),
    num("binlog_group_commit_sync_delay", "integer", 0, 1000000, 0, unit="microseconds"),
    num("binlog_group_commit_sync_no_delay_count", "integer", 0, 100000, 0),
    boolean("binlog_order_commits", True),
    enum("binlog_row_image", ["full", "minimal", "noblob"], "full"),
    enum("binlog_format", ["ROW", "STATEMENT", "MIXED"], "ROW"),
    boolean("binlog_rows_query_log_events", False),
    num("binlog_transaction_dependency_history_size", "integer", 1, 1000000, 25000, "log"),
    boolean("binlog_transaction_compression", False),
    num("binlog_transaction_compression_level_zstd", "integer", 1, 22, 3),
    num("sync_binlog", "integer", 0, 4294967295, 1),
    num("sync_relay_log", "integer", 0, 4294967295, 10000),
    num("sync_relay_log_info", "integer", 0, 4294967295, 10000),
    num("sync_master_info", "integer", 0, 4294967295, 10000),
    num("replica_parallel_workers", "integer", 0, 1024, 4),
    nbytes("replica_pending_jobs_size_max", 1 * KiB, 1 << 50, 128 * MiB),
    num("replica_checkpoint_group", "integer", 32, 524280, 512, "log"),
    num("replica_checkpoint_period", "integer", 1, 4294967295, 300, "log", "milliseconds"),
    num("replica_net_timeout", "integer", 1, 31536000, 60, "log", "seconds"),
    boolean("replica_preserve_commit_order", True),
    num("replica_transaction_retries", "integer", 0, 4294967295, 10),
    nbytes("replica_max_allowed_packet", 1 * KiB, 1 * GiB, 1 * GiB),
    nbytes("rpl_read_size", 8 * KiB, 4 * GiB, 8 * KiB),
]

PFS = [
    "accounts_size", "digests_size", "error_size", "events_stages_history_long_size",
    "events_stages_history_size", "events_statements_history_long_size",
    "events_statements_history_size", "events_transactions_history_long_size",
    "events_transactions_history_size", "events_waits_history_long_size",
    "events_waits_history_size", "hosts_size", "max_cond_classes", "max_cond_instances",
    "max_digest_length", "max_file_classes", "max_file_handles", "max_file_instances",
    "max_index_stat", "max_memory_classes", "max_metadata_locks", "max_mutex_classes",
    "max_mutex_instances", "max_prepared_statements_instances", "max_program_instances",
    "max_rwlock_classes", "max_rwlock_instances", "max_socket_classes",
    "max_socket_instances", "max_sql_text_length", "max_stage_classes",
    "max_statement_classes", "max_statement_stack", "max_table_handles",
    "max_table_instances", "max_table_lock_stat", "max_thread_classes",
    "max_thread_instances", "session_connect_attrs_size", "setup_actors_size",
    "setup_objects_size", "users_size",
]
# only the sizing knobs that are commonly tuned
for suffix in PFS[:16]:
    MYSQL.append(num("performance_schema_" + suffix, "integer", 1, 1048576, 1024, "log", restart=True))

# ---------------------------------------------------------------------------
# 50-knob synthetic-test catalog (a MySQL-flavoured subset with test defaults)
# ---------------------------------------------------------------------------
SYN = [
    num("max_connections", "integer", 10, 10000, 151, "log"),
    nbytes("sort_buffer_size", 32 * KiB, 256 * MiB, 256 * KiB),
    nbytes("join_buffer_size", 128, 256 * MiB, 256 * KiB),
    nbytes("innodb_buffer_pool_size", 128 * MiB, 128 * GiB, 8 * GiB, True),   # 3: planted, RAM-coupled
    enum("innodb_flush_log_at_trx_commit", ["0", "1", "2"], "1"),
    enum("innodb_flush_method", ["fsync", "O_DSYNC", "littlesync", "nosync", "O_DIRECT", "O_DIRECT_NO_FSYNC"], "fsync", True),
    num("table_open_cache", "integer", 1, 524288, 4000, "log"),
    num("thread_cache_size", "integer", 0, 16384, 9),
    nbytes("tmp_table_size", 1 * KiB, 4 * GiB, 16 * MiB),
    nbytes("max_heap_table_size", 16 * KiB, 4 * GiB, 16 * MiB),
    boolean("innodb_adaptive_hash_index", True),
    nbytes("innodb_log_file_size", 4 * MiB, 16 * GiB, 256 * MiB, True),        # 11: planted
    nbytes("innodb_log_buffer_size", 256 * KiB, 4 * GiB, 16 * MiB),
    num("innodb_lru_scan_depth", "integer", 100, 10000, 1024, "log"),
    num("innodb_old_blocks_pct", "integer", 5, 95, 37, unit="percent"),
    num("innodb_old_blocks_time", "integer", 0, 10000, 1000, unit="milliseconds"),
    num("innodb_max_dirty_pages_pct", "real", 0.0, 99.999, 90.0, unit="percent"),
    num("innodb_max_dirty_pages_pct_lwm", "real", 0.0, 99.999, 10.0, unit="percent"),
    num("innodb_spin_wait_delay", "integer", 0, 1000, 6),
    num("innodb_io_capacity", "integer", 100, 102400, 800, "log"),             # 19: planted
    num("innodb_io_capacity_max", "integer", 100, 204800, 2000, "log"),
    num("innodb_purge_threads", "integer", 1, 32, 4, restart=True),
    num("innodb_purge_batch_size", "integer", 1, 5000, 300),
    num("innodb_page_cleaners", "integer", 1, 64, 4, restart=True),
    num("innodb_change_buffer_max_size", "integer", 0, 50, 25, unit="percent"),
    enum("innodb_change_buffering", ["none", "inserts", "deletes", "changes", "purges", "all"], "none"),
    num("innodb_sync_spin_loops", "integer", 0, 1000, 30),
    num("innodb_thread_concurrency", "integer", 1, 256, 16, "log"),           # 27: planted, CPU-coupled
    num("innodb_concurrency_tickets", "integer", 1, 100000, 5000, "log"),
    num("innodb_adaptive_flushing_lwm", "integer", 0, 70, 10, unit="percent"),
    boolean("innodb_adaptive_flushing", True),
    num("innodb_flushing_avg_loops", "integer", 1, 1000, 30),
    num("innodb_read_ahead_threshold", "integer", 0, 64, 56),
    boolean("innodb_random_read_ahead", False),
    num("innodb_stats_persistent_sample_pages", "integer", 1, 65535, 20, "log"),
    num("table_definition_cache", "integer", 400, 524288, 2000, "log"),
    nbytes("read_buffer_size", 8 * KiB, 2 * GiB, 128 * KiB),
    nbytes("read_rnd_buffer_size", 1, 2 * GiB, 256 * KiB),
    nbytes("binlog_cache_size", 4 * KiB, 4 * GiB, 32 * KiB),
    num("sync_binlog", "integer", 0, 1000, 1),
    num("innodb_read_io_threads", "integer", 1, 64, 32, restart=True),         # 40: planted
    num("innodb_write_io_threads", "integer", 1, 64, 4, restart=True),
    nbytes("key_buffer_size", 8, 4 * GiB, 8 * MiB),
    num("binlog_group_commit_sync_delay", "integer", 0, 1000000, 0, unit="microseconds"),
    enum("transaction_isolation", ["READ-UNCOMMITTED", "READ-COMMITTED", "REPEATABLE-READ", "SERIALIZABLE"], "REPEATABLE-READ"),
    num("innodb_lock_wait_timeout", "integer", 1, 3600, 50, "log", "seconds"),
    num("net_buffer_length", "integer", 1024, 1048576, 16384, "log", "bytes"),
    num("optimizer_search_depth", "integer", 0, 62, 62),
    num("eq_range_index_dive_limit", "integer", 0, 10000, 200),
    boolean("innodb_deadlock_detect", True),
]

# ---------------------------------------------------------------------------
# 63-metric schema (five categories; State/Current -> instant, Cumulative -> counter)
# ---------------------------------------------------------------------------
STATE = ["metadata_mem_pool_size", "lock_row_lock_time_max", "lock_row_lock_time_avg",
         "buffer_pool_size", "buffer_pool_pages_total", "buffer_pool_pages_misc",
         "buffer_pool_pages_data", "buffer_pool_bytes_data", "buffer_pool_pages_dirty",
         "buffer_pool_bytes_dirty", "buffer_pool_pages_free", "trx_rseg_history_len",
         "file_num_open_files", "innodb_page_size"]
CURRENT = ["lock_row_lock_current_waits", "buffer_pool_read_ahead_evicted",
           "ibuf_merges_discard_delete_mark", "innodb_rwlock_s_spin_rounds",
           "innodb_rwlock_x_spin_rounds", "innodb_rwlock_s_os_waits", "innodb_rwlock_x_os_waits",
           "innodb_dblwr_pages_written", "innodb_rwlock_s_spin_waits", "innodb_rwlock_x_spin_waits",
           "ibuf_merges_discard_delete", "buffer_pool_read_requests", "buffer_pool_write_requests"]
CUM1 = ["lock_row_lock_time", "lock_row_lock_waits", "buffer_pool_wait_free",
        "buffer_pool_read_ahead", "adaptive_hash_searches", "adaptive_hash_searches_btree",
        "ibuf_merges_delete_mark", "ibuf_merges_discard_insert", "os_log_pending_fsyncs",
        "os_log_pending_writes", "os_log_bytes_written", "innodb_activity_count"]
CUM2 = ["buffer_pages_written", "buffer_pages_read", "buffer_data_reads", "buffer_data_written",
        "ibuf_merges_insert", "ibuf_merges_delete", "innodb_dblwr_writes", "buffer_pool_reads",
        "buffer_pages_created", "log_write_requests", "os_data_reads", "os_data_writes"]
CUM3 = ["os_data_fsyncs", "os_log_fsyncs", "lock_deadlocks", "lock_timeouts", "log_waits",
        "log_writes", "ibuf_merges", "ibuf_size", "dml_reads", "dml_inserts", "dml_deletes",
        "dml_updates"]


def write(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=1)
        f.write("\n")


def main():
    names = [k["name"] for k in MYSQL]
    assert len(names) == len(set(names)), "duplicate knob names"
    assert len(MYSQL) == 266, len(MYSQL)
    assert len(SYN) == 50, len(SYN)
    write("catalogs/mysql266.json", MYSQL)
    write("catalogs/synthetic50.json", SYN)
    schema = [{"name": n, "agg": "instant"} for n in STATE + CURRENT]
    schema += [{"name": n, "agg": "counter"} for n in CUM1 + CUM2 + CUM3]
    assert len(schema) == 63
    write("schemas/innodb63.json", schema)


if __name__ == "__main__":
    main()
