//! Generic service layer: software, files and commands attached to virtual
//! nodes. This is the extension point for services without a dedicated
//! layer type.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::base::{FileEntry, FileSource, NodeFragment, NodeKey};
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceLayer {
    vnodes: IndexMap<String, NodeFragment>,
}

impl ServiceLayer {
    pub fn new() -> Self {
        ServiceLayer::default()
    }

    pub fn install(&mut self, vnode: &str) -> VirtualNodeHandle<'_> {
        let fragment = self.vnodes.entry(vnode.to_string()).or_default();
        VirtualNodeHandle { fragment }
    }

    pub fn virtual_nodes(&self) -> impl Iterator<Item = &str> {
        self.vnodes.keys().map(String::as_str)
    }

    pub fn fragment(&self, vnode: &str) -> Option<&NodeFragment> {
        self.vnodes.get(vnode)
    }

    pub(crate) fn configure(
        &self,
        bindings: &BTreeMap<String, NodeKey>,
    ) -> Result<Vec<(NodeKey, NodeFragment)>> {
        self.vnodes
            .iter()
            .map(|(vnode, fragment)| {
                let key = bindings
                    .get(vnode)
                    .ok_or_else(|| Error::UnboundVirtualNode(vnode.clone()))?;
                Ok((key.clone(), fragment.clone()))
            })
            .collect()
    }
}

pub struct VirtualNodeHandle<'a> {
    fragment: &'a mut NodeFragment,
}

impl<'a> VirtualNodeHandle<'a> {
    pub fn add_software(self, package: &str) -> Self {
        self.fragment.software.insert(package.to_string());
        self
    }

    pub fn set_file(self, path: &str, content: &str) -> Result<Self> {
        if !path.starts_with('/') {
            return Err(Error::RelativePath(path.to_string()));
        }
        self.fragment.files.push(FileEntry {
            path: path.to_string(),
            source: FileSource::Inline(content.to_string()),
        });
        Ok(self)
    }

    pub fn add_build_command(self, command: &str) -> Self {
        self.fragment.build_commands.push(command.to_string());
        self
    }

    pub fn append_start_command(self, command: &str) -> Self {
        self.fragment.start_commands.push(command.to_string());
        self
    }
}
