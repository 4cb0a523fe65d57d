"""Built-in hub plugins and the plugin contract."""
