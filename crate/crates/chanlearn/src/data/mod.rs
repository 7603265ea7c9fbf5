//! Dataset ingestion and corruption pipelines.
