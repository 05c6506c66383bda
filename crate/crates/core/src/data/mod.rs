//! Dataset ingestion: attribute tables, images, embeddings and splits.

mod attributes;
mod embeddings;
mod image;
pub mod pnm;
mod split;

pub use attributes::{parse_attribute_file, write_attribute_file, AttributeRecord, AttributeTable};
pub use embeddings::{parse_embeddings, write_embeddings, EmbeddingTable};
pub use image::{bilinear_resize, load_image, load_images, ImageRecord};
pub use split::{make_split, BalanceMode, Split};
